//! The question-schema interaction graph: node flattening, schema linking and
//! assembly of syntax, linking and schema relations into one dense label
//! matrix.

mod document;
mod flatten;
mod label;
mod linking;

pub use document::{export_graph, import_graph, GraphDocument, GRAPH_FORMAT_VERSION};
pub use flatten::{flatten_input, FlattenedSequence, NodeSpan, SeqItem};
pub use label::{LinkKind, NodeKind, NodeRef, RelationLabel, NUM_RELATIONS};
pub use linking::{link_relations, LinkingMatrix};

use crate::error::{Error, Result};
use crate::question::{question_relation_matrix, DependencyParse, QuestionToken, SyntaxCell, SyntaxMatrix, SyntaxRelation};
use crate::schema::Schema;

/// Dense n x n matrix of relation labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationMatrix {
    n: usize,
    cells: Vec<RelationLabel>,
}

impl RelationMatrix {
    pub fn filled(n: usize, label: RelationLabel) -> Self {
        RelationMatrix {
            n,
            cells: vec![label; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> RelationLabel) -> Self {
        let mut cells = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                cells.push(f(i, j));
            }
        }
        RelationMatrix { n, cells }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> RelationLabel {
        self.cells[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, label: RelationLabel) {
        self.cells[i * self.n + j] = label;
    }

    /// Matrix with entry (i, j) = self(perm[i], perm[j]).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        Self::from_fn(self.n, |i, j| self.get(perm[i], perm[j]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, RelationLabel)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, &l)| (k / self.n, k % self.n, l))
    }
}

impl AsRef<RelationMatrix> for RelationMatrix {
    fn as_ref(&self) -> &RelationMatrix {
        self
    }
}

impl AsRef<RelationMatrix> for InteractionGraph {
    fn as_ref(&self) -> &RelationMatrix {
        &self.relations
    }
}

/// Nodes (questions, then tables, then columns) and their relation matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    nodes: Vec<NodeRef>,
    relations: RelationMatrix,
    num_questions: usize,
    num_tables: usize,
    num_columns: usize,
}

impl InteractionGraph {
    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn relations(&self) -> &RelationMatrix {
        &self.relations
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_questions(&self) -> usize {
        self.num_questions
    }

    pub fn num_tables(&self) -> usize {
        self.num_tables
    }

    pub fn num_columns(&self) -> usize {
        self.num_columns
    }

    pub fn label(&self, i: usize, j: usize) -> RelationLabel {
        self.relations.get(i, j)
    }

    /// Row/column position of a node in the matrix.
    pub fn position(&self, node: NodeRef) -> Option<usize> {
        let (offset, count) = match node.kind {
            NodeKind::Question => (0, self.num_questions),
            NodeKind::Table => (self.num_questions, self.num_tables),
            NodeKind::Column => (self.num_questions + self.num_tables, self.num_columns),
        };
        (node.index < count).then_some(offset + node.index)
    }

    pub fn label_between(&self, a: NodeRef, b: NodeRef) -> Option<RelationLabel> {
        Some(self.label(self.position(a)?, self.position(b)?))
    }

    pub fn count(&self, label: RelationLabel) -> usize {
        self.relations.iter().filter(|&(_, _, l)| l == label).count()
    }

    /// Builds a graph from its parts, checking node order and all matrix
    /// invariants.
    pub fn from_parts(nodes: Vec<NodeRef>, relations: RelationMatrix) -> Result<Self> {
        if relations.size() != nodes.len() {
            return Err(Error::Shape(format!(
                "{} nodes but a {}x{} relation matrix",
                nodes.len(),
                relations.size(),
                relations.size()
            )));
        }
        let count = |k| nodes.iter().filter(|n| n.kind == k).count();
        let (nq, nt, nc) = (
            count(NodeKind::Question),
            count(NodeKind::Table),
            count(NodeKind::Column),
        );
        let expected = node_list(nq, nt, nc);
        if nodes != expected {
            return Err(Error::Validation(
                "nodes must be questions, tables, columns, each indexed from 0".into(),
            ));
        }
        let g = InteractionGraph {
            nodes,
            relations,
            num_questions: nq,
            num_tables: nt,
            num_columns: nc,
        };
        g.check_invariants()?;
        Ok(g)
    }

    /// Diagonal is Self, every off-diagonal label sits in its own block and
    /// its inverse sits at the transposed cell.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.num_nodes();
        for (i, j, label) in self.relations.iter() {
            if i == j {
                if label != RelationLabel::SelfLoop {
                    return Err(Error::Validation(format!(
                        "diagonal cell ({i}, {i}) holds {label}"
                    )));
                }
                continue;
            }
            let block = (self.nodes[i].kind, self.nodes[j].kind);
            if label.block() != Some(block) {
                return Err(Error::Validation(format!(
                    "cell ({i}, {j}) in block {block:?} holds {label}"
                )));
            }
            let back = self.relations.get(j, i);
            if back != label.inverse() {
                return Err(Error::Validation(format!(
                    "cell ({i}, {j}) holds {label} but ({j}, {i}) holds {back}, expected {}",
                    label.inverse()
                )));
            }
        }
        debug_assert_eq!(self.relations.size(), n);
        Ok(())
    }
}

fn node_list(nq: usize, nt: usize, nc: usize) -> Vec<NodeRef> {
    (0..nq)
        .map(NodeRef::question)
        .chain((0..nt).map(NodeRef::table))
        .chain((0..nc).map(NodeRef::column))
        .collect()
}

fn syntax_label(cell: SyntaxCell) -> RelationLabel {
    match cell {
        SyntaxCell::SelfSyntax => RelationLabel::SelfLoop,
        SyntaxCell::Relation(SyntaxRelation::Forward) => RelationLabel::ForwardSyntax,
        SyntaxCell::Relation(SyntaxRelation::Backward) => RelationLabel::BackwardSyntax,
        SyntaxCell::Relation(SyntaxRelation::NoneSyntax) => RelationLabel::NoneSyntax,
    }
}

/// Merges the three relation structures. With no schema this yields a
/// question-only graph.
pub(crate) fn assemble(
    syntax: &SyntaxMatrix,
    linking: Option<&LinkingMatrix>,
    schema: Option<&Schema>,
) -> InteractionGraph {
    let nq = syntax.size();
    let (nt, nc) = schema.map_or((0, 0), |s| (s.num_tables(), s.num_columns()));
    let n = nq + nt + nc;
    let t0 = nq;
    let c0 = nq + nt;

    let mut m = RelationMatrix::filled(n, RelationLabel::SelfLoop);
    for i in 0..nq {
        for j in 0..nq {
            m.set(i, j, syntax_label(syntax.get(i, j)));
        }
    }

    let put = |m: &mut RelationMatrix, i: usize, j: usize, l: RelationLabel| {
        m.set(i, j, l);
        m.set(j, i, l.inverse());
    };

    if let (Some(_), Some(linking)) = (schema, linking) {
        for q in 0..nq {
            for t in 0..nt {
                let l = RelationLabel::linking(NodeKind::Table, linking.table(q, t));
                put(&mut m, q, t0 + t, l);
            }
            for c in 0..nc {
                let l = RelationLabel::linking(NodeKind::Column, linking.column(q, c));
                put(&mut m, q, c0 + c, l);
            }
        }
    }

    if let Some(schema) = schema {
        for a in 0..nt {
            for b in 0..nt {
                if a != b {
                    m.set(t0 + a, t0 + b, RelationLabel::TableTableDefault);
                }
            }
            for c in 0..nc {
                put(&mut m, t0 + a, c0 + c, RelationLabel::TableColumnDefault);
            }
        }
        for a in 0..nc {
            for b in 0..nc {
                if a != b {
                    m.set(c0 + a, c0 + b, RelationLabel::ColumnColumnDefault);
                }
            }
        }
        for (src, dst, label) in schema.relations() {
            let i = if src.kind == NodeKind::Table { t0 } else { c0 } + src.index;
            let j = if dst.kind == NodeKind::Table { t0 } else { c0 } + dst.index;
            match label {
                RelationLabel::Has => {
                    if m.get(i, j) != RelationLabel::PrimaryKey {
                        put(&mut m, i, j, RelationLabel::Has);
                    }
                }
                RelationLabel::ForeignKey => {
                    if m.get(j, i) == RelationLabel::ForeignKey
                        || m.get(j, i) == RelationLabel::ForeignKeyBoth
                    {
                        put(&mut m, i, j, RelationLabel::ForeignKeyBoth);
                    } else {
                        put(&mut m, i, j, RelationLabel::ForeignKey);
                    }
                }
                other => put(&mut m, i, j, other),
            }
        }
    }

    InteractionGraph {
        nodes: node_list(nq, nt, nc),
        relations: m,
        num_questions: nq,
        num_tables: nt,
        num_columns: nc,
    }
}

/// Graph over question tokens only, with Self on the diagonal and syntax
/// labels elsewhere.
pub fn question_graph(parse: &DependencyParse) -> InteractionGraph {
    assemble(&question_relation_matrix(parse), None, None)
}

pub fn build_graph(
    tokens: &[QuestionToken],
    parse: &DependencyParse,
    schema: &Schema,
) -> Result<InteractionGraph> {
    if tokens.is_empty() {
        return Err(Error::EmptyQuestion);
    }
    if tokens.len() != parse.token_count() {
        return Err(Error::Validation(format!(
            "{} question tokens but the parse covers {}",
            tokens.len(),
            parse.token_count()
        )));
    }
    if let Some((k, t)) = tokens.iter().enumerate().find(|(k, t)| t.index != *k) {
        return Err(Error::Validation(format!(
            "question token at position {k} has index {}",
            t.index
        )));
    }
    let syntax = question_relation_matrix(parse);
    let linking = link_relations(tokens, schema);
    let g = assemble(&syntax, Some(&linking), Some(schema));
    debug_assert!(g.check_invariants().is_ok());
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::question::{DepEdge, QuestionToken};
    use crate::schema::load_schema;

    #[test]
    fn smallest_graph_without_columns() {
        let parse = DependencyParse::new(1, vec![]).unwrap();
        let tokens = [QuestionToken::new(0, "ship", "ship")];
        let syntax = question_relation_matrix(&parse);
        // A bare table node: no columns, built directly at the assembly level.
        let schema = Schema {
            db_id: "d".into(),
            tables: vec![crate::schema::Table {
                id: 0,
                name_tokens: vec!["ship".into()],
                lemmas: vec!["ship".into()],
                column_ids: vec![],
            }],
            columns: vec![],
            foreign_keys: vec![],
        };
        let linking = link_relations(&tokens, &schema);
        let g = assemble(&syntax, Some(&linking), Some(&schema));
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.label(0, 0), RelationLabel::SelfLoop);
        assert_eq!(g.label(1, 1), RelationLabel::SelfLoop);
        assert_eq!(g.label(0, 1), RelationLabel::QuestionTableExact);
        assert_eq!(g.label(1, 0), RelationLabel::TableQuestionExact);
        g.check_invariants().unwrap();
    }

    #[test]
    fn schema_block_labels() {
        let schema = load_schema(
            br#"{"db_id":"d","table_names":["a","b"],
                "column_names":[[0,"id"],[0,"x"],[1,"a id"],[1,"y"]],
                "column_types":["number","text","number","text"],
                "primary_keys":[0],
                "foreign_keys":[[2,0],[1,3],[3,1]]}"#,
        )
        .unwrap();
        let parse = DependencyParse::new(
            2,
            vec![DepEdge { head: 1, dependent: 0, label: "nsubj".into() }],
        )
        .unwrap();
        let tokens = [QuestionToken::new(0, "x", "x"), QuestionToken::new(1, "q", "q")];
        let g = build_graph(&tokens, &parse, &schema).unwrap();
        let (t, c) = (NodeRef::table, NodeRef::column);
        let lb = |a, b| g.label_between(a, b).unwrap();
        assert_eq!(lb(t(0), c(0)), RelationLabel::PrimaryKey);
        assert_eq!(lb(c(0), t(0)), RelationLabel::PrimaryKeyReverse);
        assert_eq!(lb(t(0), c(1)), RelationLabel::Has);
        assert_eq!(lb(c(1), t(0)), RelationLabel::HasReverse);
        assert_eq!(lb(t(0), c(2)), RelationLabel::TableColumnDefault);
        assert_eq!(lb(c(2), t(0)), RelationLabel::ColumnTableDefault);
        assert_eq!(lb(t(0), t(1)), RelationLabel::TableTableDefault);
        assert_eq!(lb(c(2), c(0)), RelationLabel::ForeignKey);
        assert_eq!(lb(c(0), c(2)), RelationLabel::ForeignKeyReverse);
        assert_eq!(lb(c(1), c(3)), RelationLabel::ForeignKeyBoth);
        assert_eq!(lb(c(3), c(1)), RelationLabel::ForeignKeyBoth);
        assert_eq!(lb(c(0), c(1)), RelationLabel::ColumnColumnDefault);
        assert_eq!(g.label(1, 0), RelationLabel::ForwardSyntax);
        assert_eq!(g.label(0, 1), RelationLabel::BackwardSyntax);
        assert_eq!(lb(NodeRef::question(0), c(1)), RelationLabel::QuestionColumnExact);
        assert_eq!(lb(c(1), NodeRef::question(0)), RelationLabel::ColumnQuestionExact);
        g.check_invariants().unwrap();
    }

    #[test]
    fn token_count_mismatch_rejected() {
        let schema = load_schema(
            br#"{"db_id":"d","table_names":["a"],"column_names":[[0,"x"]],"column_types":["text"]}"#,
        )
        .unwrap();
        let parse = DependencyParse::new(1, vec![]).unwrap();
        let tokens = [QuestionToken::new(0, "a", "a"), QuestionToken::new(1, "b", "b")];
        assert!(matches!(build_graph(&tokens, &parse, &schema), Err(Error::Validation(_))));
        assert!(matches!(build_graph(&[], &parse, &schema), Err(Error::EmptyQuestion)));
    }

    #[test]
    fn from_parts_rejects_broken_matrices() {
        let nodes = vec![NodeRef::question(0), NodeRef::question(1)];
        let mut m = RelationMatrix::filled(2, RelationLabel::NoneSyntax);
        assert!(InteractionGraph::from_parts(nodes.clone(), m.clone()).is_err());
        m.set(0, 0, RelationLabel::SelfLoop);
        m.set(1, 1, RelationLabel::SelfLoop);
        InteractionGraph::from_parts(nodes.clone(), m.clone()).unwrap();
        m.set(0, 1, RelationLabel::ForwardSyntax);
        assert!(InteractionGraph::from_parts(nodes.clone(), m.clone()).is_err());
        m.set(1, 0, RelationLabel::BackwardSyntax);
        InteractionGraph::from_parts(nodes.clone(), m.clone()).unwrap();
        m.set(1, 0, RelationLabel::Has);
        assert!(InteractionGraph::from_parts(nodes, m).is_err());
        let swapped = vec![NodeRef::table(0), NodeRef::question(0)];
        let m2 = RelationMatrix::filled(2, RelationLabel::SelfLoop);
        assert!(InteractionGraph::from_parts(swapped, m2).is_err());
    }

    #[test]
    fn permuted_matrix() {
        let m = RelationMatrix::from_fn(3, |i, j| RelationLabel::ALL[i * 3 + j]);
        let p = m.permuted(&[2, 0, 1]);
        assert_eq!(p.get(0, 1), m.get(2, 0));
        assert_eq!(p.get(1, 2), m.get(0, 1));
    }
}

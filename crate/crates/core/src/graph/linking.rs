use super::LinkKind;
use crate::question::QuestionToken;
use crate::schema::Schema;

/// Link outcome for every (question token, table) and (question token,
/// column) pair, row-major by question token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkingMatrix {
    num_tokens: usize,
    num_tables: usize,
    num_columns: usize,
    tables: Vec<LinkKind>,
    columns: Vec<LinkKind>,
}

impl LinkingMatrix {
    pub fn table(&self, token: usize, table: usize) -> LinkKind {
        self.tables[token * self.num_tables + table]
    }

    pub fn column(&self, token: usize, column: usize) -> LinkKind {
        self.columns[token * self.num_columns + column]
    }

    pub fn num_tokens(&self) -> usize {
        self.num_tokens
    }
}

/// Tokens covered by some contiguous question span whose lemma sequence
/// equals `item` in full.
fn exact_cover(question: &[&str], item: &[String]) -> Vec<bool> {
    let mut covered = vec![false; question.len()];
    let m = item.len();
    if m == 0 || m > question.len() {
        return covered;
    }
    for start in 0..=question.len() - m {
        if question[start..start + m]
            .iter()
            .zip(item)
            .all(|(q, l)| *q == l.as_str())
        {
            covered[start..start + m].iter_mut().for_each(|c| *c = true);
        }
    }
    covered
}

/// Assigns each pair exactly one link kind with precedence
/// Exact > Partial > Value > None. Value links apply to columns only and
/// compare a single token (lemma or surface) against whole cell values,
/// case-insensitively.
pub fn link_relations(tokens: &[QuestionToken], schema: &Schema) -> LinkingMatrix {
    let lemmas: Vec<&str> = tokens.iter().map(|t| t.lemma.as_str()).collect();
    let n = tokens.len();
    let nt = schema.num_tables();
    let nc = schema.num_columns();

    let mut tables = vec![LinkKind::None; n * nt];
    for (t, table) in schema.tables.iter().enumerate() {
        let exact = exact_cover(&lemmas, &table.lemmas);
        for i in 0..n {
            tables[i * nt + t] = if exact[i] {
                LinkKind::Exact
            } else if table.lemmas.iter().any(|l| l == lemmas[i]) {
                LinkKind::Partial
            } else {
                LinkKind::None
            };
        }
    }

    let mut columns = vec![LinkKind::None; n * nc];
    for (c, column) in schema.columns.iter().enumerate() {
        let exact = exact_cover(&lemmas, &column.lemmas);
        let cells: Vec<String> = column
            .cell_values
            .iter()
            .flatten()
            .map(|v| v.to_lowercase())
            .collect();
        for (i, tok) in tokens.iter().enumerate() {
            columns[i * nc + c] = if exact[i] {
                LinkKind::Exact
            } else if column.lemmas.iter().any(|l| l == lemmas[i]) {
                LinkKind::Partial
            } else if !cells.is_empty() && {
                let surface = tok.surface.to_lowercase();
                cells.iter().any(|v| *v == tok.lemma || *v == surface)
            } {
                LinkKind::Value
            } else {
                LinkKind::None
            };
        }
    }

    LinkingMatrix {
        num_tokens: n,
        num_tables: nt,
        num_columns: nc,
        tables,
        columns,
    }
}

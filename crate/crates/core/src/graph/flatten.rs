use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::NodeRef;
use crate::error::{Error, Result};
use crate::question::QuestionToken;
use crate::schema::Schema;

/// One item of the flattened encoder input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "snake_case")]
pub enum SeqItem {
    Cls,
    Sep,
    /// Type marker inserted before each table.
    TableMarker,
    /// Type marker inserted before each column, carrying its data type name.
    ColumnMarker(String),
    Token(String),
}

impl SeqItem {
    /// Stable key used to derive the item's embedding. Tokens and special
    /// items live in disjoint namespaces.
    pub fn key(&self) -> String {
        match self {
            SeqItem::Cls => "special:[CLS]".into(),
            SeqItem::Sep => "special:[SEP]".into(),
            SeqItem::TableMarker => "marker:table".into(),
            SeqItem::ColumnMarker(t) => format!("marker:column:{t}"),
            SeqItem::Token(t) => format!("token:{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpan {
    pub node: NodeRef,
    pub start: usize,
    pub end: usize,
}

impl NodeSpan {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

/// `[CLS] q.. [SEP] (marker table-tokens (marker column-tokens)*)* [SEP]`.
///
/// `node_spans` is in graph node order (questions, tables, columns) and each
/// span covers only the item's content tokens, never its type marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlattenedSequence {
    pub items: Vec<SeqItem>,
    pub node_spans: Vec<NodeSpan>,
}

impl FlattenedSequence {
    pub fn span_of(&self, node: NodeRef) -> Option<Range<usize>> {
        self.node_spans
            .iter()
            .find(|s| s.node == node)
            .map(NodeSpan::range)
    }

    pub fn num_nodes(&self) -> usize {
        self.node_spans.len()
    }

    /// Checks the spans are in bounds, non-empty and ordered by node.
    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.node_spans.iter().enumerate() {
            if s.start >= s.end || s.end > self.items.len() {
                return Err(Error::Validation(format!(
                    "span {k} [{}, {}) invalid for {} items",
                    s.start,
                    s.end,
                    self.items.len()
                )));
            }
        }
        Ok(())
    }
}

pub fn flatten_input(tokens: &[QuestionToken], schema: &Schema) -> Result<FlattenedSequence> {
    if tokens.is_empty() {
        return Err(Error::EmptyQuestion);
    }
    let mut items = vec![SeqItem::Cls];
    let mut question_spans = Vec::with_capacity(tokens.len());
    for (i, t) in tokens.iter().enumerate() {
        question_spans.push(NodeSpan {
            node: NodeRef::question(i),
            start: items.len(),
            end: items.len() + 1,
        });
        items.push(SeqItem::Token(t.surface.to_lowercase()));
    }
    items.push(SeqItem::Sep);

    let push_tokens = |items: &mut Vec<SeqItem>, words: &[String]| -> Range<usize> {
        let start = items.len();
        items.extend(words.iter().cloned().map(SeqItem::Token));
        start..items.len()
    };

    let mut table_spans = Vec::with_capacity(schema.tables.len());
    let mut column_spans: Vec<Option<NodeSpan>> = vec![None; schema.columns.len()];
    for table in &schema.tables {
        items.push(SeqItem::TableMarker);
        let r = push_tokens(&mut items, &table.name_tokens);
        table_spans.push(NodeSpan {
            node: NodeRef::table(table.id),
            start: r.start,
            end: r.end,
        });
        for &c in &table.column_ids {
            let column = &schema.columns[c];
            items.push(SeqItem::ColumnMarker(column.data_type.name().to_string()));
            let r = push_tokens(&mut items, &column.name_tokens);
            column_spans[c] = Some(NodeSpan {
                node: NodeRef::column(c),
                start: r.start,
                end: r.end,
            });
        }
    }
    items.push(SeqItem::Sep);

    let mut node_spans = question_spans;
    node_spans.extend(table_spans);
    node_spans.extend(
        column_spans
            .into_iter()
            .map(|s| s.expect("validated schema: every column belongs to a table")),
    );
    Ok(FlattenedSequence { items, node_spans })
}

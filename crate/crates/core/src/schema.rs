//! Relational database schemas: ingestion from Spider-style `tables.json`
//! documents and the directed intra-schema relations (foreign key, ownership,
//! primary key).

use std::collections::HashSet;
use std::fmt;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{NodeRef, RelationLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    Text,
    Number,
    Time,
    Boolean,
    Other,
}

impl DataType {
    pub fn name(self) -> &'static str {
        match self {
            DataType::Text => "text",
            DataType::Number => "number",
            DataType::Time => "time",
            DataType::Boolean => "boolean",
            DataType::Other => "other",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "text" => DataType::Text,
            "number" => DataType::Number,
            "time" => DataType::Time,
            "boolean" => DataType::Boolean,
            "other" | "others" => DataType::Other,
            _ => return None,
        })
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub id: usize,
    pub table_id: usize,
    pub name_tokens: Vec<String>,
    pub lemmas: Vec<String>,
    pub data_type: DataType,
    pub is_primary: bool,
    pub cell_values: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub id: usize,
    pub name_tokens: Vec<String>,
    pub lemmas: Vec<String>,
    pub column_ids: Vec<usize>,
}

/// A validated database schema. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub db_id: String,
    pub tables: Vec<Table>,
    pub columns: Vec<Column>,
    /// Directed (from_column, to_column) pairs, unique, in document order.
    pub foreign_keys: Vec<(usize, usize)>,
}

/// Splits a schema item name into lowercase tokens.
pub fn tokenize_name(name: &str) -> Vec<String> {
    name.split(|c: char| c.is_whitespace() || c == '_')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PrimaryKeyEntry {
    Single(i64),
    Composite(Vec<i64>),
}

#[derive(Debug, Deserialize)]
struct RawSchema {
    db_id: String,
    table_names: Vec<String>,
    column_names: Vec<(i64, String)>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<PrimaryKeyEntry>,
    #[serde(default)]
    foreign_keys: Vec<(i64, i64)>,
    #[serde(default)]
    cell_values: Option<Vec<Option<Vec<String>>>>,
    #[serde(default)]
    table_name_lemmas: Option<Vec<Vec<String>>>,
    #[serde(default)]
    column_name_lemmas: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawDocument {
    One(RawSchema),
    Many(Vec<RawSchema>),
}

/// Parses and validates a schema document.
///
/// The document is either a single Spider schema object or a one-element
/// array of them. A leading `[-1, "*"]` entry in `column_names` is dropped and
/// the remaining column ids shift down by one; error messages always use the
/// ids as written in the document.
pub fn load_schema(document: &[u8]) -> Result<Schema> {
    let text = std::str::from_utf8(document)
        .map_err(|e| Error::Parse(format!("schema document is not UTF-8: {e}")))?;
    let raw: RawDocument =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("schema document: {e}")))?;
    let raw = match raw {
        RawDocument::One(s) => s,
        RawDocument::Many(mut v) => {
            if v.len() != 1 {
                return Err(Error::Validation(format!(
                    "schema document holds {} databases, expected exactly one",
                    v.len()
                )));
            }
            v.pop().unwrap()
        }
    };
    Schema::from_raw(raw)
}

impl Schema {
    fn from_raw(raw: RawSchema) -> Result<Schema> {
        if raw.table_names.is_empty() {
            return Err(Error::Validation(format!(
                "schema '{}' has no tables",
                raw.db_id
            )));
        }
        let n_doc_cols = raw.column_names.len();
        if raw.column_types.len() != n_doc_cols {
            return Err(Error::Validation(format!(
                "column_types has {} entries but column_names has {}",
                raw.column_types.len(),
                n_doc_cols
            )));
        }
        if let Some(cells) = &raw.cell_values {
            if cells.len() != n_doc_cols {
                return Err(Error::Validation(format!(
                    "cell_values has {} entries but column_names has {}",
                    cells.len(),
                    n_doc_cols
                )));
            }
        }
        if let Some(l) = &raw.column_name_lemmas {
            if l.len() != n_doc_cols {
                return Err(Error::Validation(format!(
                    "column_name_lemmas has {} entries but column_names has {}",
                    l.len(),
                    n_doc_cols
                )));
            }
        }
        if let Some(l) = &raw.table_name_lemmas {
            if l.len() != raw.table_names.len() {
                return Err(Error::Validation(format!(
                    "table_name_lemmas has {} entries but table_names has {}",
                    l.len(),
                    raw.table_names.len()
                )));
            }
        }

        // Document ids -> internal ids, skipping the all-columns entry.
        let mut doc_to_internal: Vec<Option<usize>> = Vec::with_capacity(n_doc_cols);
        let mut columns = Vec::new();
        for (doc_id, (table_idx, name)) in raw.column_names.iter().enumerate() {
            if *table_idx == -1 && name.trim() == "*" {
                doc_to_internal.push(None);
                continue;
            }
            if *table_idx < 0 || *table_idx as usize >= raw.table_names.len() {
                return Err(Error::Validation(format!(
                    "column {doc_id} ('{name}') references table {table_idx}, schema has {} tables",
                    raw.table_names.len()
                )));
            }
            let name_tokens = tokenize_name(name);
            if name_tokens.is_empty() {
                return Err(Error::Validation(format!("column {doc_id} has an empty name")));
            }
            let lemmas = match &raw.column_name_lemmas {
                Some(l) => lowercase_lemmas(&l[doc_id], || format!("column {doc_id}"))?,
                None => name_tokens.clone(),
            };
            let data_type = DataType::parse(&raw.column_types[doc_id]).ok_or_else(|| {
                Error::Parse(format!(
                    "column {doc_id} has unknown type '{}'",
                    raw.column_types[doc_id]
                ))
            })?;
            let cell_values = raw
                .cell_values
                .as_ref()
                .and_then(|cells| cells[doc_id].clone());
            doc_to_internal.push(Some(columns.len()));
            columns.push(Column {
                id: columns.len(),
                table_id: *table_idx as usize,
                name_tokens,
                lemmas,
                data_type,
                is_primary: false,
                cell_values,
            });
        }

        let resolve = |doc_id: i64, what: &str| -> Result<usize> {
            if doc_id < 0 || doc_id as usize >= n_doc_cols {
                return Err(Error::Validation(format!(
                    "{what} references column id {doc_id}, schema has {n_doc_cols} columns"
                )));
            }
            doc_to_internal[doc_id as usize].ok_or_else(|| {
                Error::Validation(format!(
                    "{what} references the all-columns entry (column id {doc_id})"
                ))
            })
        };

        for entry in &raw.primary_keys {
            let ids: Vec<i64> = match entry {
                PrimaryKeyEntry::Single(id) => vec![*id],
                PrimaryKeyEntry::Composite(ids) => ids.clone(),
            };
            for id in ids {
                let c = resolve(id, "primary key")?;
                columns[c].is_primary = true;
            }
        }

        let mut seen = HashSet::new();
        let mut foreign_keys = Vec::new();
        for &(from, to) in &raw.foreign_keys {
            let a = resolve(from, "foreign key")?;
            let b = resolve(to, "foreign key")?;
            if a == b {
                return Err(Error::Validation(format!(
                    "foreign key on column id {from} points to itself"
                )));
            }
            if seen.insert((a, b)) {
                foreign_keys.push((a, b));
            }
        }

        let mut tables = Vec::with_capacity(raw.table_names.len());
        for (id, name) in raw.table_names.iter().enumerate() {
            let name_tokens = tokenize_name(name);
            if name_tokens.is_empty() {
                return Err(Error::Validation(format!("table {id} has an empty name")));
            }
            let lemmas = match &raw.table_name_lemmas {
                Some(l) => lowercase_lemmas(&l[id], || format!("table {id}"))?,
                None => name_tokens.clone(),
            };
            let column_ids: Vec<usize> = columns
                .iter()
                .filter(|c| c.table_id == id)
                .map(|c| c.id)
                .collect();
            if column_ids.is_empty() {
                return Err(Error::Validation(format!(
                    "table {id} ('{name}') has no columns"
                )));
            }
            tables.push(Table {
                id,
                name_tokens,
                lemmas,
                column_ids,
            });
        }

        Ok(Schema {
            db_id: raw.db_id,
            tables,
            columns,
            foreign_keys,
        })
    }

    pub fn num_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// Directed schema-structure relations, ordered by table id then column
    /// id, followed by foreign keys in document order. Primary columns get
    /// both a Primary-Key and a Has relation. Inverses are not emitted.
    pub fn relations(&self) -> Vec<(NodeRef, NodeRef, RelationLabel)> {
        let mut out = Vec::new();
        for table in &self.tables {
            for &c in &table.column_ids {
                if self.columns[c].is_primary {
                    out.push((
                        NodeRef::table(table.id),
                        NodeRef::column(c),
                        RelationLabel::PrimaryKey,
                    ));
                }
                out.push((NodeRef::table(table.id), NodeRef::column(c), RelationLabel::Has));
            }
        }
        for &(a, b) in &self.foreign_keys {
            out.push((NodeRef::column(a), NodeRef::column(b), RelationLabel::ForeignKey));
        }
        out
    }
}

/// Free-function form of [`Schema::relations`].
pub fn schema_relations(schema: &Schema) -> Vec<(NodeRef, NodeRef, RelationLabel)> {
    schema.relations()
}

fn lowercase_lemmas(raw: &[String], what: impl Fn() -> String) -> Result<Vec<String>> {
    let lemmas: Vec<String> = raw
        .iter()
        .flat_map(|l| tokenize_name(l))
        .collect();
    if lemmas.is_empty() {
        return Err(Error::Validation(format!("{} has empty lemmas", what())));
    }
    Ok(lemmas)
}

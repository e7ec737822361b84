use std::fmt;

use serde::{Deserialize, Serialize};

/// Node category in the interaction graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Question,
    Table,
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub index: usize,
}

impl NodeRef {
    pub fn question(index: usize) -> Self {
        NodeRef { kind: NodeKind::Question, index }
    }

    pub fn table(index: usize) -> Self {
        NodeRef { kind: NodeKind::Table, index }
    }

    pub fn column(index: usize) -> Self {
        NodeRef { kind: NodeKind::Column, index }
    }
}

/// Schema linking outcome for one (question token, schema item) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkKind {
    None,
    Partial,
    Exact,
    Value,
}

macro_rules! relation_labels {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Closed set of edge labels of the interaction graph. The ordinal of
        /// a label indexes the relation embedding tables.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum RelationLabel {
            $($variant),*
        }

        impl RelationLabel {
            pub const ALL: &'static [RelationLabel] = &[$(RelationLabel::$variant),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(RelationLabel::$variant => $name),*
                }
            }

            pub fn from_name(name: &str) -> Option<Self> {
                match name {
                    $($name => Some(RelationLabel::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

relation_labels! {
    SelfLoop => "Self",
    ForwardSyntax => "Forward-Syntax",
    BackwardSyntax => "Backward-Syntax",
    NoneSyntax => "None-Syntax",
    ForeignKey => "Foreign-Key",
    ForeignKeyReverse => "Foreign-Key-Reverse",
    ForeignKeyBoth => "Foreign-Key-Both",
    Has => "Has",
    HasReverse => "Has-Reverse",
    PrimaryKey => "Primary-Key",
    PrimaryKeyReverse => "Primary-Key-Reverse",
    QuestionTableNone => "Question-Table-None-Linking",
    QuestionTablePartial => "Question-Table-Partial-Linking",
    QuestionTableExact => "Question-Table-Exact-Linking",
    TableQuestionNone => "Table-Question-None-Linking",
    TableQuestionPartial => "Table-Question-Partial-Linking",
    TableQuestionExact => "Table-Question-Exact-Linking",
    QuestionColumnNone => "Question-Column-None-Linking",
    QuestionColumnPartial => "Question-Column-Partial-Linking",
    QuestionColumnExact => "Question-Column-Exact-Linking",
    QuestionColumnValue => "Question-Column-Value-Linking",
    ColumnQuestionNone => "Column-Question-None-Linking",
    ColumnQuestionPartial => "Column-Question-Partial-Linking",
    ColumnQuestionExact => "Column-Question-Exact-Linking",
    ColumnQuestionValue => "Column-Question-Value-Linking",
    TableTableDefault => "Table-Table-Default",
    ColumnColumnDefault => "Column-Column-Default",
    TableColumnDefault => "Table-Column-Default",
    ColumnTableDefault => "Column-Table-Default",
}

/// Number of relation labels, i.e. rows of each relation embedding table.
pub const NUM_RELATIONS: usize = RelationLabel::ALL.len();

impl RelationLabel {
    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Label expected at (j, i) when `self` sits at (i, j). Symmetric labels
    /// are their own inverse.
    pub fn inverse(self) -> Self {
        use RelationLabel::*;
        match self {
            SelfLoop => SelfLoop,
            ForwardSyntax => BackwardSyntax,
            BackwardSyntax => ForwardSyntax,
            NoneSyntax => NoneSyntax,
            ForeignKey => ForeignKeyReverse,
            ForeignKeyReverse => ForeignKey,
            ForeignKeyBoth => ForeignKeyBoth,
            Has => HasReverse,
            HasReverse => Has,
            PrimaryKey => PrimaryKeyReverse,
            PrimaryKeyReverse => PrimaryKey,
            QuestionTableNone => TableQuestionNone,
            QuestionTablePartial => TableQuestionPartial,
            QuestionTableExact => TableQuestionExact,
            TableQuestionNone => QuestionTableNone,
            TableQuestionPartial => QuestionTablePartial,
            TableQuestionExact => QuestionTableExact,
            QuestionColumnNone => ColumnQuestionNone,
            QuestionColumnPartial => ColumnQuestionPartial,
            QuestionColumnExact => ColumnQuestionExact,
            QuestionColumnValue => ColumnQuestionValue,
            ColumnQuestionNone => QuestionColumnNone,
            ColumnQuestionPartial => QuestionColumnPartial,
            ColumnQuestionExact => QuestionColumnExact,
            ColumnQuestionValue => QuestionColumnValue,
            TableTableDefault => TableTableDefault,
            ColumnColumnDefault => ColumnColumnDefault,
            TableColumnDefault => ColumnTableDefault,
            ColumnTableDefault => TableColumnDefault,
        }
    }

    /// The (source kind, target kind) block the label may occupy. `None` for
    /// the self label, which is confined to the diagonal instead.
    pub fn block(self) -> Option<(NodeKind, NodeKind)> {
        use NodeKind::*;
        use RelationLabel::*;
        Some(match self {
            SelfLoop => return None,
            ForwardSyntax | BackwardSyntax | NoneSyntax => (Question, Question),
            ForeignKey | ForeignKeyReverse | ForeignKeyBoth | ColumnColumnDefault => {
                (Column, Column)
            }
            Has | PrimaryKey | TableColumnDefault => (Table, Column),
            HasReverse | PrimaryKeyReverse | ColumnTableDefault => (Column, Table),
            TableTableDefault => (Table, Table),
            QuestionTableNone | QuestionTablePartial | QuestionTableExact => (Question, Table),
            TableQuestionNone | TableQuestionPartial | TableQuestionExact => (Table, Question),
            QuestionColumnNone | QuestionColumnPartial | QuestionColumnExact
            | QuestionColumnValue => (Question, Column),
            ColumnQuestionNone | ColumnQuestionPartial | ColumnQuestionExact
            | ColumnQuestionValue => (Column, Question),
        })
    }

    pub fn is_syntax(self) -> bool {
        self.block() == Some((NodeKind::Question, NodeKind::Question))
    }

    pub fn is_linking(self) -> bool {
        matches!(
            self.block(),
            Some((NodeKind::Question, NodeKind::Table | NodeKind::Column))
                | Some((NodeKind::Table | NodeKind::Column, NodeKind::Question))
        )
    }

    pub fn is_schema_structure(self) -> bool {
        matches!(
            self.block(),
            Some((NodeKind::Table | NodeKind::Column, NodeKind::Table | NodeKind::Column))
        )
    }

    /// Question->schema linking label for a link outcome. Value linking
    /// exists only for columns; tables fall back to None-Linking.
    pub fn linking(target: NodeKind, link: LinkKind) -> Self {
        use RelationLabel::*;
        match (target, link) {
            (NodeKind::Table, LinkKind::Exact) => QuestionTableExact,
            (NodeKind::Table, LinkKind::Partial) => QuestionTablePartial,
            (NodeKind::Table, _) => QuestionTableNone,
            (_, LinkKind::Exact) => QuestionColumnExact,
            (_, LinkKind::Partial) => QuestionColumnPartial,
            (_, LinkKind::Value) => QuestionColumnValue,
            (_, LinkKind::None) => QuestionColumnNone,
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

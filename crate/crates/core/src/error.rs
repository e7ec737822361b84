use thiserror::Error;

/// Errors produced by ingestion, graph assembly and the encoder.
#[derive(Debug, Error)]
pub enum Error {
    /// The input document is not well-formed.
    #[error("parse error: {0}")]
    Parse(String),

    /// The document parsed but violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A dependency parse is not a single rooted tree.
    #[error("tree violation: {0}")]
    TreeViolation(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("syntax relation is undefined on the diagonal (token {0})")]
    DiagonalQuery(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty question")]
    EmptyQuestion,

    #[error("zero-norm column {0}")]
    ZeroColumn(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by malformed or unreadable input documents.
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

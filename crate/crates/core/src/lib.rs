//! Syntax-aware question-schema interaction graphs for text-to-SQL encoders.
//!
//! The crate covers the encoder side only:
//!
//! - [`schema`]: Spider-style schema ingestion and intra-schema relations.
//! - [`question`]: CoNLL-U dependency parses, collapsed to Forward / Backward
//!   / None syntax relations between question tokens.
//! - [`graph`]: input flattening, schema linking, and the dense relation
//!   label matrix over question tokens, tables and columns.
//! - [`encoder`]: relation-aware multi-head self-attention with learnable
//!   relation embeddings and exact gradients.
//! - [`decoupling`]: orthogonality penalty on the relation embeddings and
//!   similarity diagnostics.
//! - [`gradcheck`]: central-difference verification of the encoder gradients.

pub mod decoupling;
pub mod encoder;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod manifest;
pub mod question;
pub mod schema;
pub mod synth;

pub use error::{Error, Result};
pub use manifest::RunManifest;

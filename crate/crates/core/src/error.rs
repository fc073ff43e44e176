//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported shape `{0}`")]
    UnsupportedShape(String),

    #[error("invalid size parameters: {0}")]
    InvalidSize(String),

    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("mesh invariant `{invariant}` violated: {msg}")]
    Invariant { invariant: &'static str, msg: String },

    #[error("field belongs to a different model space")]
    SpaceMismatch,

    #[error("tensor variance mismatch")]
    VarianceMismatch,

    #[error("negative time t = {0}")]
    NegativeTime(f64),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("dimension bound singular: {0}")]
    DimensionSingular(String),

    #[error("inconclusive kernel threshold: {0}")]
    Inconclusive(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Non-finite intermediate values, eigensolver failures, and the like.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("numeric underflow: {0}")]
    Underflow(String),

    /// A computation whose resource estimate exceeds a hard cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The model does not provide the requested capability.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("degenerate sample: no strictly positive pairwise distances")]
    DegenerateSample,

    #[error("degenerate variance: the plug-in variance is zero")]
    DegenerateVariance,

    #[error("degenerate spectrum: no positive Gram eigenvalues")]
    DegenerateSpectrum,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by corpus loading, model fitting, and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structural problems with an input file (mixed labeling, empty file,
    /// malformed header, ...).
    #[error("format error: {0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Not enough data to carry out the operation (class absent, pool too
    /// small, too few examples per fold, ...).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("translation oracle budget of {budget} calls exhausted")]
    OracleBudget { budget: usize },

    #[error("pivot selection stopped after {found} of {requested} pivots: {reason}")]
    PivotSelection {
        found: usize,
        requested: usize,
        reason: String,
    },

    /// A selected pivot never occurs in either unlabeled corpus, so its
    /// auxiliary prediction task has no positive examples.
    #[error("untrainable auxiliary task: pivot '{0}' absent from both unlabeled corpora")]
    UntrainablePivot(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

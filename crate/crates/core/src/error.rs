use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value in {context} at step {step}")]
    NonFinite { context: &'static str, step: usize },

    #[error(
        "stale step cache: parameters changed since the forward step (cache generation {cached}, parameters {current})"
    )]
    StaleCache { cached: u64, current: u64 },

    #[error("index {index} out of range for {what} of length {len}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("missing target: head {0} requires a target at this step")]
    MissingTarget(&'static str),

    #[error("IDX ingestion failed for {path} at byte offset {offset}: {reason}")]
    Idx {
        path: String,
        offset: usize,
        reason: String,
    },

    #[error("I/O error for {path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(op: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Shape {
        op,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sample count mismatch: {left} vs {right}")]
    SampleCountMismatch { left: usize, right: usize },

    #[error("assignment instance of size {n} exceeds cap {cap}")]
    AssignmentCapExceeded { n: usize, cap: usize },

    /// The importance-sampling exponent left the representable range.
    /// Surfaced as an explicit error so line searches can backtrack instead
    /// of propagating infinities.
    #[error("exponent overflow: |{exponent}| > {limit}")]
    ExponentOverflow { exponent: f64, limit: f64 },

    #[error("unsupported dimension {dim}: {context}")]
    UnsupportedDimension { dim: usize, context: &'static str },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the numerical and structural operations of this crate.
///
/// Refutations of logmodularity are *not* errors; they travel through
/// [`crate::triangularize::Failure`]. `CoreError` is reserved for malformed
/// inputs and genuine numerical breakdowns.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite: pivot {pivot} evaluates to {value:.3e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("numerical rank inconsistency: {0}")]
    RankInconsistency(String),
    #[error("malformed input: {0}")]
    Malformed(String),
}

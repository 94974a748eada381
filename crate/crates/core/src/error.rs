use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An iterative solver ran out of budget. `last_iterate` is the final
    /// state it reached and `residual` the quantity it was driving to zero.
    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        last_iterate: Vec<f64>,
        residual: f64,
    },

    /// A checked inequality or identity did not hold.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Caller supplied inconsistent or out-of-range input.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::DimensionMismatch { .. } | Error::InvalidArgument(_))
    }

    /// Floating point breakdown or an exhausted iteration budget.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::NoConvergence { .. })
    }

    pub fn is_verification(&self) -> bool {
        matches!(self, Error::Verification(_))
    }
}

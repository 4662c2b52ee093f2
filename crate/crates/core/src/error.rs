use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation not available: {0}")]
    Misuse(&'static str),

    #[error("field belongs to a different grid")]
    GridMismatch,

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("time step violates the drift stability bound; retry with dt <= {admissible_dt:e}")]
    CflViolation { admissible_dt: f64 },

    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),

    #[error("invalid series: {0}")]
    InvalidSeries(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An integral or weighted supremum does not converge.
    #[error("divergent quantity: {0}")]
    Divergent(String),

    /// Adaptive quadrature hit its subdivision budget before meeting tolerance.
    #[error("quadrature did not converge: {0}")]
    NonConvergent(String),

    /// A sampled field carries more high-frequency content than the grid resolves.
    #[error("field not resolved on grid: {0}")]
    Unresolved(String),

    /// Quotient with zero denominator.
    #[error("degenerate field: {0}")]
    Degenerate(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    /// Nonlinear solve inside a time step failed.
    #[error("step failed at t = {t}: {reason}")]
    StepFailed { t: f64, reason: String },

    /// Two independent evaluation routes disagree beyond tolerance.
    #[error("consistency check failed: {0}")]
    Inconsistent(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

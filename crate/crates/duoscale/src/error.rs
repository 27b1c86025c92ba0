use thiserror::Error;

/// Errors raised by the model, solver and integration layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error(
        "degenerate spectrum: eigenvalues {lo} and {hi} coincide within relative tolerance {tol}"
    )]
    DegenerateSpectrum { lo: f64, hi: f64, tol: f64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("solver did not converge after {iterations} iterations (last residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("integration failed at step {step}: {reason}")]
    IntegrationFailure { step: usize, reason: String },

    #[error("frequency-response trace produced no convergent point")]
    EmptyCurve,

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::DomainError(msg.into())
    }
}

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pole at {0}")]
    Pole(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular evaluation: {0}")]
    Singular(String),
    #[error("grid mismatch: expected {expected} values, got {got}")]
    GridMismatch { expected: usize, got: usize },
    #[error("log argument non-positive at zeta = {zeta}")]
    DomainExceeded { zeta: f64 },
    #[error("no convergence after {iterations} iterations (last update {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("curve not monotone in s near index {0}")]
    NotMonotone(usize),
    #[error("quadrature did not reach tolerance (error estimate {0:e})")]
    Quadrature(f64),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DomainExceeded { .. } | Error::NoConvergence { .. } | Error::NotMonotone(_) | Error::Quadrature(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

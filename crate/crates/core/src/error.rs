use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs an even number of points >= 8, got {0}")]
    BadPointCount(usize),
    #[error("grid length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("derivative order must be at least 1")]
    ZeroDerivativeOrder,
}

/// Failures of the elliptic solves and time integrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("iterative solve stopped after {iterations} iterations with relative residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("water depth {min_depth} fell below the guard {h_min}")]
    DepthTooSmall { min_depth: f64, h_min: f64 },
    #[error("solution blew up: max norm {max_norm:e} at t = {time}")]
    BlowUp { max_norm: f64, time: f64 },
    #[error("collocation system is numerically singular")]
    SingularSystem,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {requested} vertices requested, limit is {limit}")]
    Capacity { requested: u128, limit: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("matrix of size {size} exceeds the dense limit {limit}")]
    DenseLimit { size: usize, limit: usize },

    #[error("shifted operator is not positive definite: {0}")]
    Indefinite(String),

    #[error("Chebyshev expansion needs degree {needed}, cap is {cap}; raise the degree cap")]
    DegreeCap { needed: usize, cap: usize },

    #[error("secular norm never reaches 1 above the branch point ({0})")]
    NoCrossing(String),

    #[error("1 - S(lambda) is near-singular: smallest eigenvalue {0:.3e}")]
    NearSingular(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("stale model norm: {0}")]
    Stale(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid construction parameters (grid size, densities, tolerances).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The operation is not defined for this input (e.g. range > 2 where a
    /// two-coordinate structure is required, or missing partial derivatives).
    #[error("unsupported: {0}")]
    Capability(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("exact quadrature needs {points} grid tuples, budget is {budget}; use Monte Carlo mode")]
    Budget { points: u128, budget: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

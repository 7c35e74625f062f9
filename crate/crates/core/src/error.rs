use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max defect {defect:e})")]
    NotSymmetric { defect: f64 },

    #[error("singular matrix: smallest pivot {pivot:e} below threshold {threshold:e}")]
    Singular { pivot: f64, threshold: f64 },

    #[error("eigen iteration did not converge after {iterations} iterations (estimate {estimate:e})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("witness construction failed: single-node load at node {node} has mean {mean:e} >= 0")]
    WitnessConstructionFailed { node: usize, mean: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

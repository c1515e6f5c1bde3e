use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("regularization must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("sinkhorn did not converge after {iterations} iterations (marginal residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("dense allocation refused: {n} points exceeds threshold {threshold}; use lazy evaluation")]
    AllocationRefused { n: usize, threshold: usize },

    #[error("eigensolver failed to converge (residuals {residuals:?})")]
    EigensolverFailure { residuals: Vec<f64> },

    #[error("eigenvalue modulus {modulus:.3e} is below the floor {floor:.3e}")]
    EigenvalueTooSmall { modulus: f64, floor: f64 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no transition data")]
    NoData,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

/// Errors surfaced by validation, sampling, and test routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative entry at ({0}, {1})")]
    NegativeEntry(usize, usize),
    #[error("row {0} sums to {1}, outside tolerance of 1")]
    RowSumOutOfTolerance(usize, f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("shape parameter must be positive, got {0}")]
    NonPositiveShape(f64),
    #[error("parameter vector has no positive entry")]
    AllZeroParams,
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("zero parameter at index {0} with positive moment order")]
    ZeroParamWithPositiveOrder(usize),
    #[error("parameter totals differ: {0} vs {1}")]
    SumMismatch(f64, f64),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("sample is degenerate: {0}")]
    DegenerateSample(String),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension must be at least 1")]
    InvalidDimension,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("embedding dimension {target} is smaller than the state dimension {dim}")]
    EmbeddingTooSmall { dim: usize, target: usize },

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("trace is {0}, expected 1")]
    InvalidTrace(f64),

    #[error("matrix is not positive semi-definite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("matrix is not unitary (max |U\u{2020}U - I| = {0:.3e})")]
    NotUnitary(f64),

    #[error("ensemble exponent must be positive, got {0}")]
    InvalidExponent(f64),

    #[error("moment order {0} is out of range {1}..={2}")]
    OrderOutOfRange(usize, usize, usize),

    #[error("empty state list")]
    EmptyStateList,

    #[error("{got} shots are not enough to estimate moments up to order {needed}")]
    InsufficientShots { needed: usize, got: u64 },

    #[error("at least {needed} absorbed unitaries required, got {got}")]
    InsufficientData { needed: u64, got: u64 },

    #[error("accumulator shapes differ: ({0}, {1}) vs ({2}, {3})")]
    AccumulatorShapeMismatch(usize, usize, usize, usize),

    #[error("first moment {0} is not positive; cannot estimate the rotated dimension")]
    DegenerateMoment(f64),

    #[error("pairing order {0} exceeds the supported maximum {1}")]
    UnsupportedOrder(usize, usize),

    #[error("outcome probability {value} at index {index} outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },

    #[error("inconsistent scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

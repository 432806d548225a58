use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("operator has zero trace")]
    ZeroTrace,

    #[error("operation requires a leakage subspace (d2 >= 1)")]
    NoLeakageSpace,

    #[error("gate {index} is not unitary (deviation {deviation:.3e})")]
    NonUnitary { index: usize, deviation: f64 },

    #[error("gate set is not closed under multiplication: g{0} * g{1} is not in the set")]
    NotClosed(usize, usize),

    #[error("empty gate set")]
    EmptyGateSet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gate index {index} out of range for a set of {size}")]
    InvalidIndex { index: usize, size: usize },

    #[error("noise assignment has {got} channels, gate set has {expected} gates")]
    AssignmentSize { expected: usize, got: usize },

    #[error("operation needs a fixed noise assignment, got a stochastic sampler")]
    StochasticNoise,

    #[error("enumeration of {0} sequences exceeds the brute-force limit")]
    EnumerationTooLarge(u128),

    #[error("s-matrix has complex eigenvalues (discriminant {0:.3e})")]
    ComplexEigenvalues(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit did not converge after {iterations} iterations: {reason}")]
    NoConvergence { iterations: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

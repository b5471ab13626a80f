use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {requested} exceeds supported maximum {supported}")]
    DimensionExceeded { requested: usize, supported: usize },

    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("generator capacity exceeded: index {index} not representable (limit {limit})")]
    CapacityExceeded { index: u64, limit: u64 },

    #[error("randomization {randomization} is incompatible with generator kind {kind}")]
    IncompatibleRandomization { kind: String, randomization: String },

    #[error("{file}:{line}: {message}")]
    ParameterFile {
        file: String,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: {context} expects {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not symmetric positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },

    #[error("quantile input {value} outside the open interval (0, 1)")]
    QuantileDomain { value: f64 },

    #[error(
        "point coordinate {value} at row {row} lies on the unit-cube boundary; \
         randomize the generator instead of clamping"
    )]
    UnrandomizedBoundary { value: f64, row: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("integrand returned a non-finite value at row {row}")]
    NonFiniteValue { row: usize },

    #[error("linear system is singular (condition estimate {cond_estimate:.3e})")]
    SingularSystem { cond_estimate: f64 },

    #[error("model protocol error: {0}")]
    Protocol(String),

    #[error("transport error: {0}")]
    Transport(String),
}

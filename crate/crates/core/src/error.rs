//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Fewer training points than requested centroids.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Dimensionality is not divisible by the number of subspaces.
    #[error("invalid subspace split: d={d} is not divisible by m={m}")]
    InvalidSubspaceSplit { d: usize, m: usize },

    /// A vector contains NaN or infinite coordinates.
    #[error("invalid vector: {0}")]
    InvalidVector(String),

    /// Vector length does not match the expected dimensionality.
    #[error("dimension error: expected {expected}, got {got}")]
    DimensionError { expected: usize, got: usize },

    /// A code chunk is out of range for the codebook.
    #[error("invalid code: {0}")]
    InvalidCode(String),

    /// Mismatched or malformed configuration parameters.
    #[error("config error: {0}")]
    ConfigError(String),

    /// Input violated a documented precondition (e.g. unsorted codes).
    #[error("precondition violation: {0}")]
    PreconditionViolation(String),

    /// An operation that requires at least one code was given none.
    #[error("empty dataset")]
    EmptyDataset,

    /// A serialized tree buffer failed to parse.
    #[error("corrupt buffer: {0}")]
    CorruptBuffer(String),

    /// A vector or index file is truncated or inconsistent.
    #[error("malformed file: {msg} at byte offset {offset}")]
    MalformedFile { offset: u64, msg: String },

    /// A scan produced values diverging from the ADC oracle; timings for it
    /// must not be reported.
    #[error("oracle equivalence failure: {0}")]
    EquivalenceFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

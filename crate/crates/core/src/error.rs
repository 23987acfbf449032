use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector must have positive dimension")]
    EmptyVector,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid fixed-point parameters: {0}")]
    FixedPoint(String),

    #[error("divisor must be positive")]
    ZeroDivisor,

    #[error("invalid shard count p={p} for n={n} clients")]
    InvalidShardCount { n: usize, p: usize },

    #[error("client {0} is not part of the shard plan")]
    UnknownClient(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("trim fraction {0} must lie in [0, 0.5)")]
    InvalidTrim(f64),

    #[error("{rule} needs at least {required} rows, got {found}")]
    TooFewRows {
        rule: &'static str,
        required: usize,
        found: usize,
    },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("sections={sections} must be in 1..={dim}")]
    InvalidSections { sections: usize, dim: usize },

    #[error("invalid filter configuration: {0}")]
    InvalidFilter(String),

    #[error("invalid attack: {0}")]
    InvalidAttack(String),

    #[error("invalid task or data: {0}")]
    InvalidTask(String),

    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed transcript: {0}")]
    Transcript(String),

    #[error("cancellation mismatch in shard {shard}")]
    CancellationMismatch { shard: usize },

    #[error("idx: {0}")]
    Idx(#[from] crate::sim::idx::IdxError),
}

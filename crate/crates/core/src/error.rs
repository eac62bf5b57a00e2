use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {0} vs {1}")]
    QubitMismatch(usize, usize),

    #[error("unsupported qubit count {n} (supported range {min}..={max})")]
    UnsupportedQubitCount { n: usize, min: usize, max: usize },

    #[error("dense operation requested for n = {n}, cap is n <= {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("invalid Pauli label: {0}")]
    InvalidLabel(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("malformed channel spec: {0}")]
    MalformedSpec(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid design state: {0}")]
    InvalidDesignState(String),

    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("triplets span a single base; the sieve needs at least two")]
    SingleBase,

    #[error("malformed triplet log: {0}")]
    MalformedLog(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

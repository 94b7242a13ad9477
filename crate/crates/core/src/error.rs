use thiserror::Error;

/// Errors produced by the coding, assignment and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("modulus {0} is not a prime below 2^32")]
    InvalidModulus(u64),

    #[error("zero has no multiplicative inverse")]
    ZeroInverse,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not enough shares: need {needed}, have {available}")]
    NotEnoughShares { needed: usize, available: usize },

    #[error("available symbols are not consistent with a single codeword")]
    InconsistentShares,

    #[error("subset of size {size} reveals information for a threshold of {threshold}")]
    SubsetTooLarge { size: usize, threshold: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("column {column} cannot be filled without repeating an index")]
    InfeasibleFill { column: usize },

    #[error("stopping threshold t={t} is never reached")]
    InfeasibleT { t: usize },

    #[error("simulation deadlocked: all edge nodes idle before recovery")]
    Deadlock,

    #[error("search space contains no feasible scheme")]
    EmptySpace,

    #[error("infeasible baseline configuration: {0}")]
    InfeasibleConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

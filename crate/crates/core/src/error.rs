use thiserror::Error;

/// Errors raised by validation and by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid rating scale: {0}")]
    InvalidScale(String),

    #[error("rating {value} at item {item} is outside {{0}} ∪ [1, {max}]")]
    RatingOutOfRange { item: usize, value: f64, max: f64 },

    #[error("expected {expected} items, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("item index {index} is outside 1..={d}")]
    ItemOutOfRange { index: usize, d: usize },

    #[error("query mask must be nonempty")]
    EmptyQueryMask,

    #[error("invalid query user: {0}")]
    InvalidQuery(String),

    #[error("invalid database snapshot: {0}")]
    InvalidSnapshot(String),

    #[error("invalid penalty map: {0}")]
    InvalidPenalty(String),

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("invalid reveal process: {0}")]
    InvalidReveal(String),

    #[error("invalid responder process: {0}")]
    InvalidResponder(String),

    #[error("infeasible model: {0}")]
    InfeasibleModel(String),

    #[error("oracle check accepted only {accepted} samples (need at least {required})")]
    TooFewAccepted { accepted: usize, required: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

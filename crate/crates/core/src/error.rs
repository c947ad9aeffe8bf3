use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {n} is outside the supplied range (0..={last})")]
    OutOfRange { n: usize, last: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sequence is not strictly increasing at n = {n} (σ_n < 1)")]
    NonIncreasing { n: usize },

    #[error("sequence overflows log-space representation at n = {n}")]
    Overflow { n: usize },

    #[error("contradictory asymptotics: {0}")]
    Contradiction(String),

    #[error("classification rules disagree: {0}")]
    RuleConflict(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}

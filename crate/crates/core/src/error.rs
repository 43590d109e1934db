use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular operator: {0}")]
    Singular(String),
    #[error("unsupported exponent: {0}")]
    UnsupportedExponent(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("process is not adapted: {0}")]
    NotAdapted(String),
    #[error("parity violation: {0}")]
    Parity(String),
    #[error("iteration diverged: {0}")]
    Divergence(String),
    #[error("exponential series did not converge: {0}")]
    Novikov(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a precondition (empty input, out-of-range value).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Tensor shapes disagree or a cache does not match its parameters.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A computation produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Inconsistent or invalid configuration.
    #[error("invalid config: {0}")]
    Config(String),

    /// A file does not conform to its expected layout.
    #[error("format error: {0}")]
    Format(String),

    /// Checkpoint version tag not supported by this build.
    #[error("unsupported version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

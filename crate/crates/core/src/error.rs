//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed inconsistent arguments (bad k, empty data, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// A file does not match the expected layout.
    #[error("format error: {0}")]
    Format(String),
    /// File contents are structurally valid but hold unusable values.
    #[error("data error: {0}")]
    Data(String),
    /// An operation was applied outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A fixed-width identifier space was exhausted.
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}

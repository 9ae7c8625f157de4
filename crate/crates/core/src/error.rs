//! Error types shared across the crate.

use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes or extents that cannot be combined; the message names both sides.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Invalid configuration: bad key, bad value, or an operation parameter
    /// that yields no valid result (e.g. a non-integer convolution extent).
    #[error("configuration error: {0}")]
    Config(String),

    /// A problem with a named file: missing, unreadable, or wrong content.
    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },

    /// A malformed binary payload; `offset` is the byte where parsing failed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// A NaN or infinity where all values must be finite.
    #[error("non-finite value in {context}: {details}")]
    NonFinite { context: String, details: String },
}

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn file(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::File {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub fn non_finite(context: impl Into<String>, details: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
            details: details.into(),
        }
    }

    /// Process exit code for the CLI: 2 for usage/configuration problems,
    /// 1 for operational failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}

//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A file could not be read or decoded.
    #[error("failed to read {path}: {reason}")]
    Read { path: String, reason: String },

    /// A file could not be encoded or written.
    #[error("failed to write {path}: {reason}")]
    Write { path: String, reason: String },

    /// Operands have incompatible dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration file or value is invalid.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn read(path: impl AsRef<std::path::Path>, reason: impl ToString) -> Self {
        Error::Read {
            path: path.as_ref().display().to_string(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn write(path: impl AsRef<std::path::Path>, reason: impl ToString) -> Self {
        Error::Write {
            path: path.as_ref().display().to_string(),
            reason: reason.to_string(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation.
    #[error("invalid `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// A configuration document could not be read as structured text.
    #[error("cannot parse config {path}: {reason}")]
    ConfigParse { path: PathBuf, reason: String },

    /// Malformed MovingAI map content.
    #[error("{message} at line {line}")]
    MapParse { line: usize, message: String },

    /// An argument violated an operation's precondition.
    #[error("{0}")]
    InvalidInput(String),

    /// Start/goal or obstacle-layout sampling gave up.
    #[error("map generation failed: {0}")]
    Generation(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that are detected before any training starts and
    /// stem from the user's configuration.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig { .. } | Error::ConfigParse { .. }
        )
    }
}

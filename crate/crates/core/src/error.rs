use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a domain invariant. The message names the offending
    /// parameter, file or field.
    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },

    #[error("{0} not found")]
    NotFound(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Statistical test had nothing to work with (e.g. all differences zero).
    #[error("no information: {0}")]
    NoInformation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("encoding error: {0}")]
    Encode(String),
}

impl Error {
    pub fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than the environment.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid { .. } | Error::NotFound(_) | Error::Unsupported(_) | Error::NoInformation(_)
        )
    }
}

/// Attach a path to an `io::Result`.
pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::ManifestError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Manifest(#[from] ManifestError),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("malformed json in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("degenerate view: {0}")]
    DegenerateView(String),

    #[error("training diverged at step {step}: non-finite parameter")]
    Diverged { step: usize },

    #[error("sample sink failed: {0}")]
    Sink(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

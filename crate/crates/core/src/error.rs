use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed url {input:?}: {reason}")]
    UrlParse { input: String, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("article {0} is not mature: observation ends before its target time")]
    NotMature(String),

    #[error("insufficient history: need {needed} steps, have {have}")]
    InsufficientHistory { needed: usize, have: usize },

    #[error("input error: {0}")]
    Input(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("service error: {0}")]
    Service(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

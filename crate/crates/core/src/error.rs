use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what} at line {line}: {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("invalid {what}: {msg}")]
    Invalid { what: &'static str, msg: String },

    #[error("review text is empty after cleaning")]
    EmptyAfterCleaning,

    #[error("feature {0:?} is empty after normalisation")]
    RejectedFeature(String),

    #[error(transparent)]
    Http(#[from] crate::http::HttpError),

    #[error("embedding provider failed for {} surface(s): {reason}", failed.len())]
    EmbeddingFailed { failed: Vec<String>, reason: String },

    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{n} features exceed the dense affinity limit of {max}; sample the corpus down first")]
    TooManyFeatures { n: usize, max: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("every threshold in the sweep produced an invalid clustering (k < 2 or k > n - 1); override the threshold range")]
    NoValidCandidate,

    #[error("selection failed: {0}")]
    Selection(String),

    #[error("config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            msg: msg.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The CSV header is missing a required column or carries an unknown one.
    #[error("schema error: {0}")]
    Schema(String),

    /// Davies-Bouldin is not defined for the given partition.
    #[error("undefined Davies-Bouldin index: {0}")]
    UndefinedDbi(String),

    /// EM lost all numerical mass.
    #[error("GMM fit collapsed at iteration {iteration}: {reason}")]
    Fit { iteration: usize, reason: String },

    /// Every sweep entry was undefined.
    #[error("no valid clustering in range")]
    NoValidClustering,

    /// A profile file could not be parsed or failed validation.
    #[error("invalid profile field `{field}`: {reason}")]
    Profile { field: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variants are coarse on purpose: callers (the CLI in particular) map
/// them onto exit codes, so the split is by *who* is at fault rather than by
/// which module raised the error.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad or inconsistent data: malformed numbers, missing columns,
    /// duplicate ids, unknown categorical levels.
    #[error("input error: {0}")]
    Input(String),

    /// Invalid parameters or settings (k larger than the catalog, mtry > p,
    /// fewer rows than folds, unknown method names).
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine could not produce a result (rank deficiency,
    /// non-finite intermediate values).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

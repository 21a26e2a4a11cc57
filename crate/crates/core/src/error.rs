use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the ranking engine and its loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: parse error: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("{file}:{line}: invalid {record} `{id}`: field `{field}` {message}")]
    Invariant {
        file: String,
        line: usize,
        record: &'static str,
        id: String,
        field: &'static str,
        message: String,
    },

    #[error("{file}:{line}: duplicate {record} id `{id}`")]
    Duplicate {
        file: String,
        line: usize,
        record: &'static str,
        id: String,
    },

    #[error("pattern parse error at column {column}: {message}")]
    Pattern { column: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{what} `{id}` not found{hint}")]
    NotFound {
        what: &'static str,
        id: String,
        hint: String,
    },

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("index snapshot version {found} is not supported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },

    #[error("training error: {0}")]
    Training(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data or configuration rather than a bug.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Training(_) | Error::Evaluation(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("image `{image_ref}`: {message}")]
    Image { image_ref: String, message: String },

    #[error("split needs {requested} records but only {available} are available")]
    SplitSize { requested: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("decode failed: {0}")]
    Decode(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),

    #[error("checkpoint {field} is {checkpoint} but the current configuration expects {expected}")]
    DimensionMismatch {
        field: String,
        checkpoint: usize,
        expected: usize,
    },
}

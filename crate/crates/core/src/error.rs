use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("invalid color: {0}")]
    Color(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch:.2}: {detail}")]
    Divergence { epoch: f64, detail: String },

    #[error("empty description")]
    EmptyDescription,

    #[error("cannot encode description {0:?} with this model")]
    Unencodable(String),

    #[error("{count} item(s) have zero probability under the model (first at index {first})")]
    ZeroProbability { count: usize, first: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("checkpoint error at byte offset {offset}: {detail}")]
    Checkpoint { offset: u64, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("report error: {0}")]
    Report(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn checkpoint(offset: u64, detail: impl Into<String>) -> Self {
        Error::Checkpoint {
            offset,
            detail: detail.into(),
        }
    }
}

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("parse error at {path}:{line}: column `{column}`: {message}")]
    Parse {
        path: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("inference error: {0}")]
    Inference(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("classification error: {0}")]
    Classification(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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
}

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("contract violated in {op}: {detail}")]
    Contract { op: &'static str, detail: String },

    #[error("non-finite value in {op} at offset {offset}")]
    NonFinite { op: &'static str, offset: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("oracle could not answer query `{query}` after {attempts} attempts")]
    OracleExhausted { query: String, attempts: usize },

    #[error("invalid config key `{key}`: {constraint}")]
    Config { key: String, constraint: String },

    #[error("checkpoint error ({path}): {detail}")]
    Checkpoint { path: PathBuf, detail: String },

    #[error("missing prerequisite {path}: run `opbn {producer}` first")]
    MissingPrerequisite { path: PathBuf, producer: &'static str },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Contract {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

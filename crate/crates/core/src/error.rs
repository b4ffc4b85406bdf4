use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("malformed completion: {0}")]
    Parse(String),

    #[error("event {index}: key `{key}` {reason}")]
    Schema {
        index: usize,
        key: String,
        reason: String,
    },

    #[error("singular design matrix: {0}")]
    Singular(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("provider transport failure: {0}")]
    Transport(String),

    #[error("unknown token id {id} for table `{table}` of size {size}")]
    OutOfVocabulary {
        table: &'static str,
        id: usize,
        size: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

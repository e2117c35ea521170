use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}, line {line}: malformed row: {msg}")]
    MalformedRow {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("shape mismatch in {layer}: expected {expected_out}x{expected_in}, got {got_out}x{got_in}")]
    ShapeMismatch {
        layer: String,
        expected_in: usize,
        expected_out: usize,
        got_in: usize,
        got_out: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

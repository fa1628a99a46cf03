use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("degenerate key: every product of reflection and coupling coefficients is zero")]
    DegenerateKey,

    #[error("empty database")]
    EmptyDatabase,

    #[error("mode count mismatch: database has {database} modes, key has {key}")]
    ModeMismatch { database: usize, key: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

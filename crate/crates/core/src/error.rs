use thiserror::Error;

/// Errors raised by the estimation, fitting and bidding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("invalid data: {0}")]
    Data(String),

    /// A configuration value outside its admissible range.
    #[error("invalid config: {0}")]
    Config(String),

    /// A numerical routine produced a non-finite or out-of-domain result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

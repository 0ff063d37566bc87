use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation (shape mismatch,
    /// negative distance, fold count out of range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear solve or factorization broke down, or an iterate became
    /// non-finite.
    #[error("numerical failure: {message}{}", condition.map(|c| format!(" (condition estimate {c:.3e})")).unwrap_or_default())]
    Numerical {
        message: String,
        condition: Option<f64>,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical {
            message: msg.into(),
            condition: None,
        }
    }
}

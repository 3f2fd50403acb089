use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("data error on {date}: {message}")]
    Data { date: NaiveDate, message: String },

    #[error("domain error on {date}: {message}")]
    Domain { date: NaiveDate, message: String },

    #[error("nonpositive value {value} at index {index} under log-difference")]
    NonPositive { index: usize, value: f64 },

    #[error("variable `{0}` has no observations")]
    EmptyVariable(String),

    #[error("insufficient data for {what}: need {needed}, got {got}")]
    InsufficientData {
        what: String,
        needed: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("rank deficient design: {} collinear with preceding columns", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("model mismatch: {0}")]
    Mismatch(String),

    #[error("no splits in model: {0}")]
    NoSplits(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => ErrorKind::Config,
            Error::RankDeficient { .. }
            | Error::NoSplits(_)
            | Error::Domain { .. }
            | Error::NonPositive { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

use chrono::NaiveDate;
use thiserror::Error;

use crate::ingest::DroppedDay;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("moments undefined: {0}")]
    UndefinedMoments(String),

    #[error("series are not aligned: {0}")]
    Misaligned(String),

    #[error("unreadable tick header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },

    #[error("line {line}: {message}")]
    MalformedLine { line: u64, message: String },

    #[error("ticks out of order at {0}")]
    Unordered(String),

    #[error("non-positive price {price} on {day}")]
    NonPositivePrice { day: NaiveDate, price: f64 },

    #[error("no trading days retained ({} dropped)", dropped.len())]
    NoRetainedDays { dropped: Vec<DroppedDay> },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures caused by the content of the input data rather than
    /// by arguments or the environment.
    pub fn is_data_quality(&self) -> bool {
        matches!(
            self,
            Error::NoRetainedDays { .. }
                | Error::MalformedLine { .. }
                | Error::BadHeader { .. }
                | Error::Unordered(_)
                | Error::NonPositivePrice { .. }
                | Error::InsufficientData { .. }
                | Error::UndefinedMoments(_)
                | Error::Misaligned(_)
        )
    }
}

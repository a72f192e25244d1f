use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid item `{id}`: {reason}")]
    InvalidItem { id: String, reason: String },

    #[error("invalid item bank: {0}")]
    InvalidBank(String),

    #[error("response {value} for item `{item}` is outside its category range")]
    OutOfRangeResponse { item: String, value: u8 },

    #[error("response pattern has {got} entries but the bank has {expected} items")]
    PatternLength { expected: usize, got: usize },

    #[error("invalid quadrature grid: {0}")]
    InvalidBounds(String),

    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),

    #[error("item `{0}` has no response variation")]
    InsufficientVariation(String),

    #[error("respondent `{0}` has no observed responses")]
    EmptyRow(String),

    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },

    #[error("item `{0}` appears in both the anchor and the free set")]
    OverlappingItems(String),

    #[error("item `{0}` not found")]
    UnknownItem(String),

    #[error("residuals for item `{0}` have zero variance")]
    DegenerateResiduals(String),

    #[error("purification would leave fewer than 3 items")]
    TooFewItemsRemaining,

    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),

    #[error("template field `{0}` is empty")]
    EmptyField(&'static str),

    #[error("invalid template: {0}")]
    InvalidTemplate(String),

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("existing score file {path} was produced with a different model or template set")]
    ResumeMismatch { path: PathBuf },

    #[error("no task has an eligible candidate item")]
    EmptySelection,

    #[error("bank exhausted: every rating-scale item has been administered")]
    BankExhausted,

    #[error("respondent `{respondent}` is missing a response to rating-scale item `{item}`")]
    IncompleteResponses { respondent: String, item: String },

    #[error("invalid CAT configuration: {0}")]
    InvalidCatConfig(String),

    #[error("test traces cover different respondents: {0}")]
    MismatchedRespondents(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("raw rating {value} for item `{item}` is outside 0..=10")]
    OutOfRangeRaw { item: String, value: i64 },

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: u64,
        message: String,
    },

    #[error("{path}: schema error: {message}")]
    Schema { path: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid_item(id: &str, reason: impl Into<String>) -> Self {
        Error::InvalidItem {
            id: id.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by the input data rather than configuration or I/O.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidItem { .. }
                | Error::InvalidBank(_)
                | Error::OutOfRangeResponse { .. }
                | Error::PatternLength { .. }
                | Error::InsufficientVariation(_)
                | Error::EmptyRow(_)
                | Error::TooFewItems { .. }
                | Error::OverlappingItems(_)
                | Error::UnknownItem(_)
                | Error::DegenerateResiduals(_)
                | Error::TooFewItemsRemaining
                | Error::EmptySelection
                | Error::BankExhausted
                | Error::IncompleteResponses { .. }
                | Error::MismatchedRespondents(_)
                | Error::DegenerateVariance(_)
                | Error::OutOfRangeRaw { .. }
                | Error::Parse { .. }
                | Error::Schema { .. }
                | Error::ResumeMismatch { .. }
                | Error::Json(_)
        )
    }
}

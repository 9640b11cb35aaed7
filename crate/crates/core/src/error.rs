use thiserror::Error;

#[derive(Debug, Error)]
pub enum DcafError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("request {request} has {found} gains, expected {expected}")]
    LengthMismatch {
        request: usize,
        expected: usize,
        found: usize,
    },

    #[error("request {request}: action index {index} out of range for {actions} actions")]
    ActionOutOfRange {
        request: usize,
        index: usize,
        actions: usize,
    },

    #[error("exact oracle refused: {work} DP cells exceed the work limit of {limit}")]
    WorkLimitExceeded { work: u128, limit: u64 },

    #[error("gain rows violate the monotonicity assumptions ({count} violations, first at request {first_request}, action {first_action})")]
    AssumptionsViolated {
        count: usize,
        first_request: usize,
        first_action: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DcafError>;

pub(crate) fn invalid(msg: impl Into<String>) -> DcafError {
    DcafError::InvalidInput(msg.into())
}

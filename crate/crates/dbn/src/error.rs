use thiserror::Error;

pub type Result<T> = std::result::Result<T, DbnError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbnError {
    #[error("need at least {needed} rows, have {have}")]
    InsufficientRows { needed: usize, have: usize },

    #[error("column `{0}` has zero variance in the training window")]
    ZeroVariance(String),

    #[error("column `{column}` is missing a value at row {row}")]
    MissingValue { column: String, row: usize },

    #[error("missing evidence for `{0}`")]
    MissingEvidence(String),

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

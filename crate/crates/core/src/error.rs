use thiserror::Error;

pub type Result<T> = std::result::Result<T, RiskError>;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unparseable cell at row {row}, column `{column}`: {value:?}")]
    Unparseable { row: usize, column: String, value: String },

    #[error("duplicate date {0}")]
    DuplicateDate(String),

    #[error("column `{0}` has no observed values")]
    EmptyColumn(String),

    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("insufficient data: need {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("calibration failed after {restarts} restarts (best log-likelihood {best_loglik}): {reason}")]
    Calibration {
        restarts: usize,
        best_loglik: f64,
        reason: String,
    },

    #[error("invalid forecast: {0}")]
    InvalidForecast(String),
}

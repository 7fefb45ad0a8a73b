use thiserror::Error;

pub type Result<T> = std::result::Result<T, EngineError>;

#[derive(Debug, Error)]
pub enum EngineError {
    /// Invalid or inconsistent configuration; aborts before any forecasting.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Risk(#[from] tailrisk_core::RiskError),

    #[error(transparent)]
    Dbn(#[from] tailrisk_dbn::DbnError),

    /// A step could not run because an earlier one failed.
    #[error("{0}")]
    Upstream(String),

    /// A forecast tried to read data dated on or after its forecast date.
    #[error("look-ahead: row {row} requested with bound {bound}")]
    LookAhead { row: usize, bound: usize },
}

impl EngineError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

//! Rolling ES and stressed ES study runner: configuration, per-date
//! forecasting for every model, backtests, error scores and reports.

pub mod audit;
pub mod config;
pub mod error;
pub mod models;
pub mod report;
pub mod study;
pub mod synth;

pub use config::{Overrides, StudyConfig};
pub use error::{EngineError, Result};
pub use models::ModelSpec;
pub use report::{emit_reports, RunManifest};
pub use study::{prepare, run_study, StudyResult};

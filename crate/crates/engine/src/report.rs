//! Study artifacts: forecasts.csv, backtests.json, scores.csv, failures.csv
//! and run_manifest.json.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::config::StudyConfig;
use crate::error::{EngineError, Result};
use crate::study::{DbnSummary, StudyResult};

pub const FORECASTS: &str = "forecasts.csv";
pub const BACKTESTS: &str = "backtests.json";
pub const SCORES: &str = "scores.csv";
pub const FAILURES: &str = "failures.csv";
pub const MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// The effective configuration, CLI overrides included.
    pub config: StudyConfig,
    pub n_forecast_dates: usize,
    pub first_forecast_date: NaiveDate,
    pub last_forecast_date: NaiveDate,
    /// Requested dates without a complete realized horizon.
    pub clipped_dates: Vec<NaiveDate>,
    pub n_records: usize,
    pub n_failures: usize,
    pub warnings: Vec<String>,
    pub dbn: Vec<DbnSummary>,
}

impl RunManifest {
    pub fn from_result(r: &StudyResult) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: r.config.seed()?,
            config: r.config.clone(),
            n_forecast_dates: r.forecast_dates.len(),
            first_forecast_date: r.forecast_dates[0],
            last_forecast_date: *r.forecast_dates.last().expect("at least one forecast date"),
            clipped_dates: r.clipped_dates.clone(),
            n_records: r.n_records(),
            n_failures: r.failures.len(),
            warnings: r.warnings.clone(),
            dbn: r.dbn.clone(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Serialize)]
struct ForecastRow<'a> {
    date: NaiveDate,
    model: &'a str,
    metric: &'a str,
    var: f64,
    es: f64,
    realized: f64,
    var_breach: bool,
    es_breach: bool,
    pit: Option<f64>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| EngineError::io(path, e))?,
    ))
}

/// Writes every artifact into `out_dir`, creating it if needed.
pub fn emit_reports(result: &StudyResult, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| EngineError::io(dir, e))?;

    let mut w = csv::Writer::from_writer(create(&dir.join(FORECASTS))?);
    for s in &result.streams {
        let model = s.model.id();
        for r in &s.records {
            w.serialize(ForecastRow {
                date: r.date,
                model: &model,
                metric: s.metric.as_str(),
                var: r.var_forecast,
                es: r.es_forecast,
                realized: r.realized_h_return,
                var_breach: r.var_breach,
                es_breach: r.es_breach,
                pit: r.pit,
            })?;
        }
    }
    w.flush().map_err(|e| EngineError::io(dir.join(FORECASTS), e))?;

    let path = dir.join(BACKTESTS);
    let mut f = create(&path)?;
    serde_json::to_writer_pretty(&mut f, &result.outcomes)?;
    writeln!(f)
        .and_then(|_| f.flush())
        .map_err(|e| EngineError::io(&path, e))?;

    let mut w = csv::Writer::from_writer(create(&dir.join(SCORES))?);
    // Header written by hand so an empty score list still gets one.
    w.write_record([
        "model_id",
        "metric_id",
        "mae",
        "rmse",
        "mape_pct",
        "n_obs",
        "n_smape_substitutions",
        "rank",
    ])?;
    for s in &result.scores {
        let r = &s.report;
        w.write_record([
            r.model_id.clone(),
            r.metric_id.as_str().into(),
            r.mae.to_string(),
            r.rmse.to_string(),
            r.mape_pct.to_string(),
            r.n_obs.to_string(),
            r.n_smape_substitutions.to_string(),
            s.rank.to_string(),
        ])?;
    }
    w.flush().map_err(|e| EngineError::io(dir.join(SCORES), e))?;

    let mut w = csv::Writer::from_writer(create(&dir.join(FAILURES))?);
    w.write_record(["date", "model", "metric", "stage", "message"])?;
    for f in &result.failures {
        w.write_record([
            f.date.to_string(),
            f.model.clone(),
            f.metric.as_str().into(),
            f.stage.clone(),
            f.message.clone(),
        ])?;
    }
    w.flush().map_err(|e| EngineError::io(dir.join(FAILURES), e))?;

    let path = dir.join(MANIFEST);
    let mut f = create(&path)?;
    serde_json::to_writer_pretty(&mut f, &RunManifest::from_result(result)?)?;
    writeln!(f)
        .and_then(|_| f.flush())
        .map_err(|e| EngineError::io(&path, e))?;
    Ok(())
}

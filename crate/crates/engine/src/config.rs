//! Declarative study configuration (JSON).

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tailrisk_core::data::PanelSchema;
use tailrisk_core::risk::ForecastConfig;
use tailrisk_core::scores::Metric;

use crate::error::{EngineError, Result};
use crate::models::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelConfig {
    /// CSV path; relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub target_column: String,
    /// Explanatory columns for the DBN models; `None` uses every column.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DateRange {
    pub start: NaiveDate,
    /// Inclusive; defaults to the last date with a complete realized horizon.
    #[serde(default)]
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbnSettings {
    /// Candidate significance levels; the lowest-AIC structure wins.
    pub ci_alpha_grid: Vec<f64>,
    /// Forecast dates between structure relearns (parameters refit daily).
    pub relearn_every: usize,
    pub max_cond: usize,
}

impl Default for DbnSettings {
    fn default() -> Self {
        Self {
            ci_alpha_grid: vec![0.01, 0.05, 0.1],
            relearn_every: 21,
            max_cond: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSettings {
    pub mc_trials: usize,
    pub significance: f64,
    pub de_lags: usize,
    /// Use a Monte Carlo instead of the chi-square p-value for Du-Escanciano.
    pub de_monte_carlo: bool,
}

impl Default for BacktestSettings {
    fn default() -> Self {
        Self {
            mc_trials: 1000,
            significance: 0.05,
            de_lags: 1,
            de_monte_carlo: false,
        }
    }
}

fn default_window() -> usize {
    1264
}
fn default_horizon() -> usize {
    10
}
fn default_alpha() -> f64 {
    0.025
}
fn default_portfolio() -> f64 {
    1.0
}
fn default_metrics() -> Vec<Metric> {
    vec![Metric::Es, Metric::Ses]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub panel: PanelConfig,
    pub out_of_sample: DateRange,
    #[serde(default = "default_window")]
    pub window_len: usize,
    #[serde(default = "default_horizon")]
    pub horizon_days: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_portfolio")]
    pub portfolio_value: f64,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub dbn: DbnSettings,
    #[serde(default)]
    pub backtests: BacktestSettings,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// Command-line values that replace config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub models: Option<Vec<ModelSpec>>,
    pub metrics: Option<Vec<Metric>>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| EngineError::Config(e.to_string()))
    }

    /// Reads a config file and resolves a relative panel path against it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if cfg.panel.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.panel.path = dir.join(&cfg.panel.path);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(m) = o.models {
            self.models = m;
        }
        if let Some(m) = o.metrics {
            self.metrics = m;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.out_dir.is_some() {
            self.out_dir = o.out_dir;
        }
    }

    pub fn schema(&self) -> PanelSchema {
        PanelSchema {
            target_column: self.panel.target_column.clone(),
            columns: self.panel.columns.clone(),
        }
    }

    pub fn forecast_config(&self) -> ForecastConfig {
        ForecastConfig {
            alpha: self.alpha,
            horizon_days: self.horizon_days,
            window_len: self.window_len,
            portfolio_value: self.portfolio_value,
        }
    }

    /// The seed, which every run must supply.
    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| EngineError::Config("a seed is required (config `seed` or --seed)".into()))
    }

    /// Checks everything that does not need the panel.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EngineError::Config(m));
        self.forecast_config()
            .validate()
            .map_err(|e| EngineError::Config(e.to_string()))?;
        self.seed()?;
        if self.models.is_empty() {
            return bad("no models selected".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(m) = self.models.iter().find(|m| !seen.insert(**m)) {
            return bad(format!("model `{m}` listed twice"));
        }
        if self.metrics.is_empty() {
            return bad("no metrics selected".into());
        }
        if self.metrics.len() != self.metrics.iter().collect::<std::collections::BTreeSet<_>>().len() {
            return bad("metric listed twice".into());
        }
        if let Some(end) = self.out_of_sample.end {
            if end < self.out_of_sample.start {
                return bad(format!(
                    "out-of-sample end {end} precedes start {}",
                    self.out_of_sample.start
                ));
            }
        }
        let d = &self.dbn;
        if d.ci_alpha_grid.is_empty() || d.ci_alpha_grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return bad("dbn.ci_alpha_grid needs values in (0, 1)".into());
        }
        if d.relearn_every == 0 {
            return bad("dbn.relearn_every must be at least 1".into());
        }
        let b = &self.backtests;
        if b.mc_trials < 100 {
            return bad(format!("backtests.mc_trials must be at least 100, got {}", b.mc_trials));
        }
        if !(b.significance > 0.0 && b.significance < 1.0) {
            return bad("backtests.significance must lie in (0, 1)".into());
        }
        if b.de_lags == 0 {
            return bad("backtests.de_lags must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "panel": {"path": "p.csv", "target_column": "price"},
        "out_of_sample": {"start": "2010-01-04"},
        "models": ["hs", "garch_normal"],
        "seed": 7
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = StudyConfig::from_json(MINIMAL).unwrap();
        assert_eq!((c.window_len, c.horizon_days, c.alpha), (1264, 10, 0.025));
        assert_eq!(c.metrics, vec![Metric::Es, Metric::Ses]);
        assert_eq!(c.dbn, DbnSettings::default());
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(StudyConfig::from_json(&MINIMAL.replace("\"hs\"", "\"hx\"")).is_err());
        assert!(StudyConfig::from_json(&MINIMAL.replace("\"seed\"", "\"sede\"")).is_err());
        let mut c = StudyConfig::from_json(MINIMAL).unwrap();
        c.seed = None;
        assert!(c.validate().is_err());
        c.apply(Overrides {
            seed: Some(1),
            ..Default::default()
        });
        c.validate().unwrap();
        c.models.push(crate::models::ModelSpec::Hs);
        assert!(c.validate().is_err());
        let mut c = StudyConfig::from_json(MINIMAL).unwrap();
        c.backtests.mc_trials = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = StudyConfig::from_json(MINIMAL).unwrap();
        let back = StudyConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}

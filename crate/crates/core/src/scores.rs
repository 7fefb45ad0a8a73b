//! Forecast error scores (MAE, RMSE, MAPE with SMAPE fallback) and model
//! ranking.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RiskError};
use crate::risk::ForecastRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Es,
    Ses,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Es => "es",
            Metric::Ses => "ses",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub model_id: String,
    pub metric_id: Metric,
    pub mae: f64,
    pub rmse: f64,
    pub mape_pct: f64,
    pub n_obs: usize,
    pub n_smape_substitutions: usize,
}

/// Percentage term for one date. Residuals compare the forecast loss with the
/// realized loss `-realized`; a zero realized value switches to SMAPE.
fn pct_term(forecast: f64, realized: f64) -> (f64, bool) {
    if realized != 0.0 {
        ((forecast + realized).abs() / realized.abs(), false)
    } else {
        let denom = forecast.abs() + realized.abs();
        let t = if denom > 0.0 {
            2.0 * (forecast - realized).abs() / denom
        } else {
            0.0
        };
        (t, true)
    }
}

/// Scores `(forecast, realized)` pairs.
pub fn score_pairs(model_id: &str, metric: Metric, pairs: &[(f64, f64)]) -> Result<ScoreReport> {
    if pairs.is_empty() {
        return Err(RiskError::InsufficientData { needed: 1, have: 0 });
    }
    if pairs.iter().any(|(f, r)| !f.is_finite() || !r.is_finite()) {
        return Err(RiskError::InvalidForecast(format!(
            "non-finite forecast or realized value for {model_id}"
        )));
    }
    if pairs.iter().all(|(f, r)| *f == 0.0 && *r == 0.0) {
        return Err(RiskError::Degenerate(
            "all forecasts and realized values are zero; percentage error undefined".into(),
        ));
    }
    let n = pairs.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut pct_sum = 0.0;
    let mut subs = 0;
    for &(f, r) in pairs {
        let e = f + r;
        abs_sum += e.abs();
        sq_sum += e * e;
        let (t, sub) = pct_term(f, r);
        pct_sum += t;
        subs += usize::from(sub);
    }
    let mae = abs_sum / n;
    // Guard the power-mean inequality against last-bit rounding.
    let rmse = (sq_sum / n).sqrt().max(mae);
    Ok(ScoreReport {
        model_id: model_id.to_string(),
        metric_id: metric,
        mae,
        rmse,
        mape_pct: 100.0 * pct_sum / n,
        n_obs: pairs.len(),
        n_smape_substitutions: subs,
    })
}

/// Scores the ES forecasts of one model's record stream.
pub fn score(records: &[ForecastRecord], metric: Metric) -> Result<ScoreReport> {
    let Some(first) = records.first() else {
        return Err(RiskError::InsufficientData { needed: 1, have: 0 });
    };
    if records.iter().any(|r| r.model_id != first.model_id) {
        return Err(RiskError::InvalidArgument("records mix several models".into()));
    }
    let pairs: Vec<(f64, f64)> = records.iter().map(|r| (r.es_forecast, r.realized_h_return)).collect();
    score_pairs(&first.model_id, metric, &pairs)
}

fn compare(a: &ScoreReport, b: &ScoreReport) -> Ordering {
    a.mae
        .total_cmp(&b.mae)
        .then(a.rmse.total_cmp(&b.rmse))
        .then(a.mape_pct.total_cmp(&b.mape_pct))
        .then_with(|| a.model_id.cmp(&b.model_id))
}

/// Orders reports by MAE, then RMSE, then MAPE, then model id.
pub fn rank_models(reports: &[ScoreReport]) -> Result<Vec<ScoreReport>> {
    if reports.len() < 2 {
        return Err(RiskError::InvalidArgument("ranking needs at least two reports".into()));
    }
    if reports.iter().any(|r| r.metric_id != reports[0].metric_id) {
        return Err(RiskError::InvalidArgument("cannot rank reports across metrics".into()));
    }
    let mut out = reports.to_vec();
    out.sort_by(compare);
    Ok(out)
}

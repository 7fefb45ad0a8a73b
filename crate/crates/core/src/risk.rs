//! h-day VaR / ES estimators, reported as positive loss magnitudes in return
//! units, and the per-date forecast record.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{overlapping_h_returns, ReturnSeries};
use crate::distributions::{DistKind, InnovationDistribution};
use crate::error::{Result, RiskError};
use crate::volatility::{calibrate_mle, filter_variances, Calibration, CalibrationOptions, Family, VariancePath};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub alpha: f64,
    pub horizon_days: usize,
    pub window_len: usize,
    /// Multiplier applied to forecasts and realized returns in records.
    pub portfolio_value: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            alpha: 0.025,
            horizon_days: 10,
            window_len: 1264,
            portfolio_value: 1.0,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(RiskError::InvalidArgument(format!(
                "alpha must lie in (0, 0.5), got {}",
                self.alpha
            )));
        }
        if self.horizon_days == 0 || self.window_len <= self.horizon_days {
            return Err(RiskError::InvalidArgument(format!(
                "need 1 <= horizon ({}) < window ({})",
                self.horizon_days, self.window_len
            )));
        }
        if !(self.portfolio_value > 0.0) {
            return Err(RiskError::InvalidArgument("portfolio value must be positive".into()));
        }
        Ok(())
    }
}

/// A VaR / ES pair as positive loss magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarEs {
    pub var: f64,
    pub es: f64,
}

/// Predictive law of the next h-day return, kept in the compact form the
/// backtest simulators need: draws are exact below the VaR level and pinned
/// to the VaR boundary above it.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveLaw {
    Parametric {
        loc: f64,
        scale: f64,
        dist: InnovationDistribution,
        alpha: f64,
        q_alpha: f64,
    },
    Empirical {
        /// Window size.
        m: usize,
        /// The `k + 1` smallest window values, ascending.
        lowest: Vec<f64>,
    },
}

impl PredictiveLaw {
    pub fn parametric(loc: f64, scale: f64, dist: InnovationDistribution, alpha: f64) -> Result<Self> {
        Ok(Self::Parametric {
            loc,
            scale,
            dist,
            alpha,
            q_alpha: dist.quantile(alpha)?,
        })
    }

    /// Inverse-CDF draw for a uniform `u`.
    pub fn tail_draw(&self, u: f64) -> f64 {
        match self {
            Self::Parametric {
                loc,
                scale,
                dist,
                alpha,
                q_alpha,
            } => {
                if *scale == 0.0 {
                    *loc
                } else if u < *alpha && u > 0.0 {
                    loc + scale * dist.quantile(u).unwrap_or(*q_alpha)
                } else {
                    loc + scale * q_alpha
                }
            }
            Self::Empirical { m, lowest } => {
                let j = ((u * *m as f64) as usize).min(lowest.len() - 1);
                lowest[j]
            }
        }
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn tail_count(alpha: f64, m: usize) -> usize {
    // Guard against 0.025 * 80 landing a hair under 2.
    (alpha * m as f64 + 1e-9).floor() as usize
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(RiskError::InvalidArgument(format!(
            "alpha must lie in (0, 0.5), got {alpha}"
        )))
    }
}

/// Historical-simulation estimator over a window of h-day returns.
///
/// With `k = floor(alpha m)`, VaR is minus the k-th smallest return and ES is
/// minus the mean of the k smallest.
pub fn empirical_var_es(window: &[f64], alpha: f64) -> Result<VarEs> {
    Ok(empirical_with_law(window, alpha)?.0)
}

/// Empirical estimator plus its predictive law.
pub fn empirical_with_law(window: &[f64], alpha: f64) -> Result<(VarEs, PredictiveLaw)> {
    check_alpha(alpha)?;
    let m = window.len();
    let needed = (1.0 / alpha).ceil() as usize;
    let k = tail_count(alpha, m);
    if m < needed || k == 0 {
        return Err(RiskError::InsufficientData { needed, have: m });
    }
    let s = sorted(window);
    let var = -s[k - 1];
    let es = -s[..k].iter().sum::<f64>() / k as f64;
    let lowest = s[..(k + 1).min(m)].to_vec();
    Ok((VarEs { var, es }, PredictiveLaw::Empirical { m, lowest }))
}

/// Empirical CDF of `window` at `x`, linear between order statistics:
/// 0 below the minimum, `i/m` at the i-th order statistic, 1 at and above the
/// maximum.
pub fn empirical_pit(window: &[f64], x: f64) -> f64 {
    let s = sorted(window);
    let m = s.len();
    if m == 0 || x < s[0] {
        return 0.0;
    }
    if x >= s[m - 1] {
        return 1.0;
    }
    // s[i] <= x < s[i + 1]
    let i = s.partition_point(|v| *v <= x) - 1;
    let (lo, hi) = (s[i], s[i + 1]);
    let frac = if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
    ((i + 1) as f64 + frac) / m as f64
}

/// Normal estimator from the window's sample mean and standard deviation.
pub fn delta_normal_var_es(window: &[f64], alpha: f64) -> Result<VarEs> {
    Ok(delta_normal_with_law(window, alpha)?.0)
}

pub fn delta_normal_with_law(window: &[f64], alpha: f64) -> Result<(VarEs, PredictiveLaw)> {
    check_alpha(alpha)?;
    if window.len() < 30 {
        return Err(RiskError::InsufficientData {
            needed: 30,
            have: window.len(),
        });
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Rounding leaves a tiny positive variance on constant windows.
    if !(var > 1e-24 * mean * mean) || var == 0.0 {
        return Err(RiskError::Degenerate("zero-variance window".into()));
    }
    let sd = var.sqrt();
    let law = PredictiveLaw::parametric(mean, sd, InnovationDistribution::Normal, alpha)?;
    Ok((
        location_scale_var_es(mean, sd, &InnovationDistribution::Normal, alpha)?,
        law,
    ))
}

/// VaR / ES of `loc + scale * Z`.
pub fn location_scale_var_es(loc: f64, scale: f64, dist: &InnovationDistribution, alpha: f64) -> Result<VarEs> {
    check_alpha(alpha)?;
    if !(scale >= 0.0) {
        return Err(RiskError::InvalidArgument(format!("negative scale {scale}")));
    }
    Ok(VarEs {
        var: -(loc + scale * dist.quantile(alpha)?),
        es: -(loc + scale * dist.tail_expectation(alpha)?),
    })
}

/// A volatility model calibrated on a window of (overlapping) returns.
#[derive(Debug, Clone)]
pub struct CalibratedModel {
    pub calibration: Calibration,
    pub path: VariancePath,
}

impl CalibratedModel {
    pub fn fit(
        family: Family,
        dist: DistKind,
        returns: &ReturnSeries,
        warm_start: Option<&crate::volatility::ModelParams>,
        opts: &CalibrationOptions,
    ) -> Result<Self> {
        let calibration = calibrate_mle(family, returns, dist, warm_start, opts)?;
        let path = filter_variances(&calibration.params, returns)?;
        Ok(Self { calibration, path })
    }

    pub fn next_sigma(&self) -> f64 {
        self.path.next_sigma2.sqrt()
    }
}

/// VaR / ES from the model's one-step-ahead variance forecast.
pub fn parametric_var_es(model: &CalibratedModel, alpha: f64) -> Result<VarEs> {
    let p = &model.calibration.params;
    location_scale_var_es(p.mu, model.next_sigma(), &p.dist, alpha)
}

pub fn parametric_law(model: &CalibratedModel, alpha: f64) -> Result<PredictiveLaw> {
    let p = &model.calibration.params;
    PredictiveLaw::parametric(p.mu, model.next_sigma(), p.dist, alpha)
}

/// Appends a one-day-ahead forecast to `window_len - 1` realized daily
/// returns and rolls the combined series into overlapping h-day returns. The
/// last h-day value mixes `h - 1` realized days with the forecast.
pub fn bn_augmented_window(
    hist_daily: &ReturnSeries,
    forecast_return: f64,
    forecast_date: NaiveDate,
    cfg: &ForecastConfig,
) -> Result<ReturnSeries> {
    if hist_daily.len() + 1 != cfg.window_len {
        return Err(RiskError::InvalidArgument(format!(
            "expected {} historical daily returns, got {}",
            cfg.window_len - 1,
            hist_daily.len()
        )));
    }
    if !forecast_return.is_finite() {
        return Err(RiskError::InvalidForecast(format!(
            "non-finite forecast return {forecast_return}"
        )));
    }
    let mut combined = hist_daily.clone();
    combined.values.push(forecast_return);
    combined.dates.push(forecast_date);
    overlapping_h_returns(&combined, cfg.horizon_days)
}

/// One model's forecast for one date, with realized outcome and breach flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub date: NaiveDate,
    pub model_id: String,
    pub var_forecast: f64,
    pub es_forecast: f64,
    pub realized_h_return: f64,
    pub var_breach: bool,
    pub es_breach: bool,
    /// Predictive CDF at the realized return.
    pub pit: Option<f64>,
    pub law: Option<PredictiveLaw>,
}

/// Builds a record, scaling forecasts and the realized return by the
/// portfolio value. A breach needs the loss to strictly exceed the forecast.
pub fn make_forecast_record(
    date: NaiveDate,
    model_id: &str,
    forecast: VarEs,
    realized_h_return: f64,
    cfg: &ForecastConfig,
) -> Result<ForecastRecord> {
    if !(forecast.var >= 0.0 && forecast.es >= 0.0) {
        return Err(RiskError::InvalidForecast(format!(
            "negative loss forecast (var={}, es={})",
            forecast.var, forecast.es
        )));
    }
    let p = cfg.portfolio_value;
    let (var, es, realized) = (forecast.var * p, forecast.es * p, realized_h_return * p);
    Ok(ForecastRecord {
        date,
        model_id: model_id.to_string(),
        var_forecast: var,
        es_forecast: es,
        realized_h_return: realized,
        var_breach: realized < -var,
        es_breach: realized < -es,
        pit: None,
        law: None,
    })
}

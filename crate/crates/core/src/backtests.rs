//! Forecast-stream backtests: the cumulative-binomial traffic light, the
//! conditional and minimally biased ES tests with Monte Carlo significance,
//! and the Du-Escanciano Portmanteau test on cumulative violations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::distributions::InnovationDistribution;
use crate::error::{Result, RiskError};
use crate::numeric::derive_seed;
use crate::risk::{ForecastRecord, PredictiveLaw};

pub const GREEN_LIMIT: f64 = 0.95;
pub const YELLOW_LIMIT: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Pass,
    Reject,
    CannotPerform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Green,
    Yellow,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestOutcome {
    pub test_id: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub decision: Decision,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zone: Option<Zone>,
    pub n_breaches: usize,
    pub n_obs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl BacktestOutcome {
    fn cannot_perform(test_id: &str, n_breaches: usize, n_obs: usize, why: &str) -> Self {
        Self {
            test_id: test_id.to_string(),
            statistic: None,
            p_value: None,
            decision: Decision::CannotPerform,
            zone: None,
            n_breaches,
            n_obs,
            diagnostic: Some(why.to_string()),
        }
    }
}

/// Zones a breach count by `P[Binomial(n_obs, p) <= n_breaches]`: green below
/// 0.95, yellow below 0.9999, red otherwise.
pub fn traffic_light(n_breaches: usize, n_obs: usize, p: f64) -> Result<BacktestOutcome> {
    if n_obs == 0 {
        return Err(RiskError::InvalidArgument("traffic light needs n_obs >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(RiskError::InvalidArgument(format!(
            "coverage must lie in (0, 1), got {p}"
        )));
    }
    let binom = Binomial::new(p, n_obs as u64).map_err(|e| RiskError::InvalidArgument(format!("binomial: {e}")))?;
    let cum = binom.cdf(n_breaches as u64);
    let zone = if cum < GREEN_LIMIT {
        Zone::Green
    } else if cum < YELLOW_LIMIT {
        Zone::Yellow
    } else {
        Zone::Red
    };
    Ok(BacktestOutcome {
        test_id: "traffic_light".into(),
        statistic: Some(cum),
        p_value: None,
        decision: if zone == Zone::Red {
            Decision::Reject
        } else {
            Decision::Pass
        },
        zone: Some(zone),
        n_breaches,
        n_obs,
        diagnostic: None,
    })
}

/// Monte Carlo settings for simulation-based significance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub trials: usize,
    pub seed: u64,
    /// One-sided test level.
    pub significance: f64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 1,
            significance: 0.05,
        }
    }
}

/// Sorted simulated statistics under the null.
#[derive(Debug, Clone)]
pub struct NullDistribution {
    samples: Vec<f64>,
    /// Trials that produced no statistic (e.g. no breach).
    pub undefined: usize,
}

impl NullDistribution {
    /// Runs `trials` simulations in parallel; trial `i` draws from a stream
    /// seeded by `(seed, i)`, so the result does not depend on scheduling.
    pub fn simulate<F>(trials: usize, seed: u64, simulator: F) -> Result<Self>
    where
        F: Fn(&mut ChaCha8Rng) -> Result<Option<f64>> + Sync,
    {
        if trials < 100 {
            return Err(RiskError::InvalidArgument(format!(
                "need at least 100 Monte Carlo trials, got {trials}"
            )));
        }
        let draws: Vec<Option<f64>> = (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                simulator(&mut rng)
            })
            .collect::<Result<_>>()?;
        let mut samples: Vec<f64> = draws.iter().flatten().copied().collect();
        samples.sort_by(f64::total_cmp);
        Ok(Self {
            undefined: trials - samples.len(),
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Lower-tail p-value `(1 + #{sim <= observed}) / (trials + 1)`.
    pub fn p_value(&self, observed: f64) -> f64 {
        let below = self.samples.partition_point(|s| *s <= observed);
        (1 + below) as f64 / (self.samples.len() + 1) as f64
    }
}

/// One-sided (lower-tail) Monte Carlo p-value of `observed`.
pub fn mc_pvalue<F>(observed: f64, simulator: F, trials: usize, seed: u64) -> Result<f64>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Option<f64>> + Sync,
{
    Ok(NullDistribution::simulate(trials, seed, simulator)?.p_value(observed))
}

/// Realized P&L, VaR and ES per date, as the Z statistics consume them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailObs {
    pub pnl: f64,
    pub var: f64,
    pub es: f64,
}

impl From<&ForecastRecord> for TailObs {
    fn from(r: &ForecastRecord) -> Self {
        Self {
            pnl: r.realized_h_return,
            var: r.var_forecast,
            es: r.es_forecast,
        }
    }
}

/// Conditional statistic `(1/N_b) sum_{breach} X_t / ES_t + 1`, where a
/// breach is `X_t + VaR_t < 0`. `None` when there is no breach.
pub fn z_cb_statistic(obs: &[TailObs]) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for o in obs.iter().filter(|o| o.pnl + o.var < 0.0) {
        if o.es == 0.0 {
            return Err(RiskError::InvalidForecast("zero ES on a VaR-breach day".into()));
        }
        sum += o.pnl / o.es;
        n += 1;
    }
    Ok((n > 0).then(|| sum / n as f64 + 1.0))
}

/// Which indicator term the minimally biased statistic uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZmbVariant {
    /// `(VaR_t + X_t) 1{X_t + VaR_t < 0} / alpha`
    RealizedPnl,
    /// `(VaR_t + ES_t) 1{X_t + VaR_t < 0} / alpha`
    AsPrinted,
}

/// `(1/N) sum_t [ES_t - VaR_t + indicator term]`.
pub fn z_mb_statistic(obs: &[TailObs], alpha: f64, variant: ZmbVariant) -> Result<f64> {
    if obs.is_empty() {
        return Err(RiskError::InsufficientData { needed: 1, have: 0 });
    }
    let total: f64 = obs
        .iter()
        .map(|o| {
            let tail = if o.pnl + o.var < 0.0 {
                match variant {
                    ZmbVariant::RealizedPnl => (o.var + o.pnl) / alpha,
                    ZmbVariant::AsPrinted => (o.var + o.es) / alpha,
                }
            } else {
                0.0
            };
            o.es - o.var + tail
        })
        .sum();
    Ok(total / obs.len() as f64)
}

fn laws(records: &[ForecastRecord]) -> Result<Vec<&PredictiveLaw>> {
    records
        .iter()
        .map(|r| {
            r.law.as_ref().ok_or_else(|| {
                RiskError::InvalidArgument(format!("record {} / {} carries no predictive law", r.model_id, r.date))
            })
        })
        .collect()
}

/// Draws one P&L path from the records' predictive laws (scaled to record
/// units by `scale`), keeping each date's forecasts.
fn simulate_obs(records: &[ForecastRecord], laws: &[&PredictiveLaw], scale: f64, rng: &mut ChaCha8Rng) -> Vec<TailObs> {
    records
        .iter()
        .zip(laws)
        .map(|(r, law)| TailObs {
            pnl: scale * law.tail_draw(rng.random::<f64>()),
            var: r.var_forecast,
            es: r.es_forecast,
        })
        .collect()
}

fn decide(p: f64, significance: f64) -> Decision {
    if p < significance {
        Decision::Reject
    } else {
        Decision::Pass
    }
}

/// Conditional (Acerbi-Szekely) test. `portfolio_value` maps law draws (return
/// units) to record units.
pub fn z_cb(records: &[ForecastRecord], portfolio_value: f64, mc: &McSettings) -> Result<BacktestOutcome> {
    let obs: Vec<TailObs> = records.iter().map(TailObs::from).collect();
    let n_breaches = obs.iter().filter(|o| o.pnl + o.var < 0.0).count();
    let Some(stat) = z_cb_statistic(&obs)? else {
        return Ok(BacktestOutcome::cannot_perform(
            "z_cb",
            0,
            obs.len(),
            "no VaR breach observed",
        ));
    };
    let laws = laws(records)?;
    let null = NullDistribution::simulate(mc.trials, mc.seed, |rng| {
        z_cb_statistic(&simulate_obs(records, &laws, portfolio_value, rng))
    })?;
    let p = null.p_value(stat);
    Ok(BacktestOutcome {
        test_id: "z_cb".into(),
        statistic: Some(stat),
        p_value: Some(p),
        decision: decide(p, mc.significance),
        zone: None,
        n_breaches,
        n_obs: obs.len(),
        diagnostic: (null.undefined > 0)
            .then(|| format!("{} null trials without a breach were discarded", null.undefined)),
    })
}

/// Minimally biased (Acerbi-Szekely) test.
pub fn z_mb(
    records: &[ForecastRecord],
    alpha: f64,
    variant: ZmbVariant,
    portfolio_value: f64,
    mc: &McSettings,
) -> Result<BacktestOutcome> {
    let obs: Vec<TailObs> = records.iter().map(TailObs::from).collect();
    let stat = z_mb_statistic(&obs, alpha, variant)?;
    let laws = laws(records)?;
    let null = NullDistribution::simulate(mc.trials, mc.seed, |rng| {
        z_mb_statistic(&simulate_obs(records, &laws, portfolio_value, rng), alpha, variant).map(Some)
    })?;
    let p = null.p_value(stat);
    Ok(BacktestOutcome {
        test_id: match variant {
            ZmbVariant::RealizedPnl => "z_mb".into(),
            ZmbVariant::AsPrinted => "z_mb_as_printed".into(),
        },
        statistic: Some(stat),
        p_value: Some(p),
        decision: decide(p, mc.significance),
        zone: None,
        n_breaches: obs.iter().filter(|o| o.pnl + o.var < 0.0).count(),
        n_obs: obs.len(),
        diagnostic: None,
    })
}

/// Probability integral transforms of realized outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct PitSeries {
    pub dates: Vec<chrono::NaiveDate>,
    pub u: Vec<f64>,
}

/// `F((x - loc) / scale)`; a zero scale degenerates to a step at `loc`.
pub fn parametric_pit(loc: f64, scale: f64, dist: &InnovationDistribution, x: f64) -> f64 {
    if scale > 0.0 {
        dist.cdf((x - loc) / scale).clamp(0.0, 1.0)
    } else if x >= loc {
        1.0
    } else {
        0.0
    }
}

/// Collects the PIT values carried by a record stream.
pub fn pit_transform(records: &[ForecastRecord]) -> Result<PitSeries> {
    let u = records
        .iter()
        .map(|r| {
            r.pit.ok_or_else(|| {
                RiskError::InvalidArgument(format!("no predictive distribution for {} on {}", r.model_id, r.date))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PitSeries {
        dates: records.iter().map(|r| r.date).collect(),
        u,
    })
}

/// Cumulative violations `H_t = (alpha - u_t) 1{u_t <= alpha} / alpha`.
pub fn cumulative_violations(u: &[f64], alpha: f64) -> Vec<f64> {
    u.iter()
        .map(|&ut| if ut <= alpha { (alpha - ut) / alpha } else { 0.0 })
        .collect()
}

/// `N sum_{j=1..n_lags} rho_j^2` over the `H_t` series, autocovariances with
/// divisor `N`. `None` for a zero-variance `H` series.
pub fn du_escanciano_statistic(u: &[f64], alpha: f64, n_lags: usize) -> Option<f64> {
    let h = cumulative_violations(u, alpha);
    let n = h.len();
    let mean = h.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = h.iter().map(|v| v - mean).collect();
    let gamma0 = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(gamma0 > 1e-300) {
        return None;
    }
    let sum_sq: f64 = (1..=n_lags)
        .map(|j| {
            let gj = c[j..].iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            (gj / gamma0).powi(2)
        })
        .sum();
    Some(n as f64 * sum_sq)
}

pub const MIN_PIT_LEN: usize = 50;

fn de_precheck(pit: &PitSeries, alpha: f64, n_lags: usize) -> Result<usize> {
    if pit.u.len() < MIN_PIT_LEN {
        return Err(RiskError::InsufficientData {
            needed: MIN_PIT_LEN,
            have: pit.u.len(),
        });
    }
    if n_lags == 0 || n_lags >= pit.u.len() {
        return Err(RiskError::InvalidArgument(format!("invalid lag count {n_lags}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RiskError::InvalidArgument(format!("invalid alpha {alpha}")));
    }
    if pit.u.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(RiskError::InvalidArgument("PIT values must lie in [0, 1]".into()));
    }
    Ok(pit.u.iter().filter(|u| **u <= alpha).count())
}

/// Du-Escanciano test with the asymptotic chi-squared(n_lags) p-value.
pub fn du_escanciano(pit: &PitSeries, alpha: f64, n_lags: usize, significance: f64) -> Result<BacktestOutcome> {
    let breaches = de_precheck(pit, alpha, n_lags)?;
    let Some(stat) = du_escanciano_statistic(&pit.u, alpha, n_lags) else {
        return Ok(BacktestOutcome::cannot_perform(
            "du_escanciano",
            breaches,
            pit.u.len(),
            "cumulative violation series has zero variance",
        ));
    };
    let chi2 = ChiSquared::new(n_lags as f64).map_err(|e| RiskError::InvalidArgument(format!("chi-squared: {e}")))?;
    let p = chi2.sf(stat);
    Ok(BacktestOutcome {
        test_id: "du_escanciano".into(),
        statistic: Some(stat),
        p_value: Some(p),
        decision: decide(p, significance),
        zone: None,
        n_breaches: breaches,
        n_obs: pit.u.len(),
        diagnostic: None,
    })
}

/// Du-Escanciano test with a Monte Carlo p-value from iid uniform PITs, for
/// small samples. Large statistics are evidence against the null, so the
/// p-value is the upper-tail share.
pub fn du_escanciano_mc(pit: &PitSeries, alpha: f64, n_lags: usize, mc: &McSettings) -> Result<BacktestOutcome> {
    let breaches = de_precheck(pit, alpha, n_lags)?;
    let Some(stat) = du_escanciano_statistic(&pit.u, alpha, n_lags) else {
        return Ok(BacktestOutcome::cannot_perform(
            "du_escanciano_mc",
            breaches,
            pit.u.len(),
            "cumulative violation series has zero variance",
        ));
    };
    let n = pit.u.len();
    // Negate so the lower-tail machinery measures the upper tail.
    let null = NullDistribution::simulate(mc.trials, mc.seed, |rng| {
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        Ok(du_escanciano_statistic(&u, alpha, n_lags).map(|s| -s))
    })?;
    let p = null.p_value(-stat);
    Ok(BacktestOutcome {
        test_id: "du_escanciano_mc".into(),
        statistic: Some(stat),
        p_value: Some(p),
        decision: decide(p, mc.significance),
        zone: None,
        n_breaches: breaches,
        n_obs: n,
        diagnostic: None,
    })
}

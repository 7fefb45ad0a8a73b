//! Conditional variance models: ARCH(1), GARCH(1,1), EGARCH(1,1) and the
//! RiskMetrics EWMA, with maximum-likelihood calibration.
//!
//! Calibration works on returns divided by their sample standard deviation,
//! so fitted ARCH/GARCH `omega` scales exactly with the square of the return
//! scale. Constraints are mapped to unconstrained coordinates (log for
//! positive quantities, a logistic simplex for `alpha + beta < 1`, `tanh` for
//! EGARCH `|beta| < 1`) and the negative log-likelihood is minimized with a
//! Nelder-Mead simplex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ReturnSeries;
use crate::distributions::{DistKind, InnovationDistribution};
use crate::error::{Result, RiskError};
use crate::numeric::{derive_seed, nelder_mead, SimplexOptions};

/// RiskMetrics decay factor.
pub const RISKMETRICS_LAMBDA: f64 = 0.94;
/// Bounds on EGARCH log-variance.
pub const EGARCH_LOGVAR_BOUND: f64 = 40.0;
pub const MIN_FILTER_LEN: usize = 30;
pub const MIN_CALIBRATION_LEN: usize = 250;

const NU_MIN: f64 = 2.05;
const NU_MAX: f64 = 100.0;
const SKEW_MIN: f64 = 0.1;
const SKEW_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Arch,
    Garch,
    Egarch,
    RiskMetrics,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Arch => "arch",
            Family::Garch => "garch",
            Family::Egarch => "egarch",
            Family::RiskMetrics => "riskmetrics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub family: Family,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    /// EGARCH leverage coefficient.
    pub gamma_lev: f64,
    /// RiskMetrics decay.
    pub lambda: f64,
    /// Conditional mean; fixed at zero by the calibrator.
    pub mu: f64,
    pub dist: InnovationDistribution,
}

impl ModelParams {
    pub fn arch(omega: f64, alpha: f64, dist: InnovationDistribution) -> Result<Self> {
        Self {
            family: Family::Arch,
            omega,
            alpha,
            beta: 0.0,
            gamma_lev: 0.0,
            lambda: 0.0,
            mu: 0.0,
            dist,
        }
        .validated()
    }

    pub fn garch(omega: f64, alpha: f64, beta: f64, dist: InnovationDistribution) -> Result<Self> {
        Self {
            family: Family::Garch,
            omega,
            alpha,
            beta,
            gamma_lev: 0.0,
            lambda: 0.0,
            mu: 0.0,
            dist,
        }
        .validated()
    }

    pub fn egarch(omega: f64, alpha: f64, beta: f64, gamma_lev: f64, dist: InnovationDistribution) -> Result<Self> {
        Self {
            family: Family::Egarch,
            omega,
            alpha,
            beta,
            gamma_lev,
            lambda: 0.0,
            mu: 0.0,
            dist,
        }
        .validated()
    }

    pub fn riskmetrics(dist: InnovationDistribution) -> Self {
        Self {
            family: Family::RiskMetrics,
            omega: 0.0,
            alpha: 0.0,
            beta: 0.0,
            gamma_lev: 0.0,
            lambda: RISKMETRICS_LAMBDA,
            mu: 0.0,
            dist,
        }
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RiskError::InvalidParams(msg));
        let finite = [self.omega, self.alpha, self.beta, self.gamma_lev, self.mu]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return bad(format!("non-finite parameter in {self:?}"));
        }
        match self.family {
            Family::Arch => {
                if !(self.omega > 0.0 && self.alpha >= 0.0) {
                    return bad(format!(
                        "arch needs omega > 0, alpha >= 0 (omega={}, alpha={})",
                        self.omega, self.alpha
                    ));
                }
            }
            Family::Garch => {
                if !(self.omega > 0.0 && self.alpha > 0.0 && self.beta > 0.0 && self.alpha + self.beta < 1.0) {
                    return bad(format!(
                        "garch needs omega, alpha, beta > 0 and alpha + beta < 1 \
                         (omega={}, alpha={}, beta={})",
                        self.omega, self.alpha, self.beta
                    ));
                }
            }
            Family::Egarch => {
                if self.beta.abs() >= 1.0 {
                    return bad(format!("egarch needs |beta| < 1 (beta={})", self.beta));
                }
            }
            Family::RiskMetrics => {
                if self.lambda != RISKMETRICS_LAMBDA {
                    return bad(format!("riskmetrics lambda must be 0.94, got {}", self.lambda));
                }
            }
        }
        Ok(())
    }

    fn expect_family(&self, family: Family) -> Result<()> {
        if self.family != family {
            return Err(RiskError::InvalidParams(format!(
                "expected {} parameters, got {}",
                family.as_str(),
                self.family.as_str()
            )));
        }
        self.validate()
    }
}

/// `omega + alpha * eps^2`.
pub fn arch_next_var(params: &ModelParams, eps_t: f64) -> Result<f64> {
    params.expect_family(Family::Arch)?;
    Ok(params.omega + params.alpha * eps_t * eps_t)
}

/// `omega + alpha * sigma2 * z^2 + beta * sigma2`, with `z` the standardized
/// innovation.
pub fn garch_next_var(params: &ModelParams, sigma2_t: f64, eps_std_t: f64) -> Result<f64> {
    params.expect_family(Family::Garch)?;
    if !(sigma2_t > 0.0) {
        return Err(RiskError::InvalidArgument(format!(
            "variance must be positive, got {sigma2_t}"
        )));
    }
    Ok(garch_step(params, sigma2_t, eps_std_t))
}

fn garch_step(p: &ModelParams, sigma2: f64, z: f64) -> f64 {
    p.omega + p.alpha * sigma2 * z * z + p.beta * sigma2
}

/// Next log-variance:
/// `omega + beta ln sigma2 + alpha (|z| - E|z|) + gamma z`, `z = eps / sigma`.
pub fn egarch_next_logvar(params: &ModelParams, sigma2_t: f64, eps_t: f64) -> Result<f64> {
    params.expect_family(Family::Egarch)?;
    if !(sigma2_t > 0.0) {
        return Err(RiskError::InvalidArgument(format!(
            "variance must be positive, got {sigma2_t}"
        )));
    }
    Ok(egarch_step(params, params.dist.abs_mean(), sigma2_t, eps_t))
}

fn egarch_step(p: &ModelParams, abs_mean: f64, sigma2: f64, eps: f64) -> f64 {
    let z = eps / sigma2.sqrt();
    p.omega + p.beta * sigma2.ln() + p.alpha * (z.abs() - abs_mean) + p.gamma_lev * z
}

/// `0.94 sigma2 + 0.06 r^2`.
pub fn riskmetrics_next_var(sigma2_t: f64, r_t: f64) -> f64 {
    RISKMETRICS_LAMBDA * sigma2_t + (1.0 - RISKMETRICS_LAMBDA) * r_t * r_t
}

/// Filtered conditional variances over a return sample.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePath {
    pub dates: Vec<chrono::NaiveDate>,
    pub sigma2: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Variance forecast for the step after the last observation.
    pub next_sigma2: f64,
    /// Number of EGARCH steps whose log-variance hit the clamp.
    pub clamped: usize,
}

pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

struct RawPath {
    sigma2: Vec<f64>,
    next: f64,
    clamped: usize,
}

fn run_filter(p: &ModelParams, returns: &[f64], sigma2_init: f64) -> RawPath {
    let n = returns.len();
    let mut sigma2 = Vec::with_capacity(n);
    let mut clamped = 0;
    let abs_mean = if p.family == Family::Egarch {
        p.dist.abs_mean()
    } else {
        0.0
    };
    let mut s2 = sigma2_init;
    for &r in returns {
        sigma2.push(s2);
        let eps = r - p.mu;
        s2 = match p.family {
            Family::Arch => p.omega + p.alpha * eps * eps,
            Family::Garch => p.omega + p.alpha * eps * eps + p.beta * s2,
            Family::RiskMetrics => riskmetrics_next_var(s2, eps),
            Family::Egarch => {
                let lv = egarch_step(p, abs_mean, s2, eps);
                let bounded = if lv.is_nan() {
                    EGARCH_LOGVAR_BOUND
                } else {
                    lv.clamp(-EGARCH_LOGVAR_BOUND, EGARCH_LOGVAR_BOUND)
                };
                if bounded != lv {
                    clamped += 1;
                }
                bounded.exp()
            }
        };
    }
    RawPath {
        sigma2,
        next: s2,
        clamped,
    }
}

/// Runs the family recursion over `returns`, starting from the sample
/// variance of the window.
pub fn filter_variances(params: &ModelParams, returns: &ReturnSeries) -> Result<VariancePath> {
    params.validate()?;
    if returns.len() < MIN_FILTER_LEN {
        return Err(RiskError::InsufficientData {
            needed: MIN_FILTER_LEN,
            have: returns.len(),
        });
    }
    let init = sample_variance(&returns.values);
    if !(init > 0.0) {
        return Err(RiskError::Degenerate("zero-variance return window".into()));
    }
    let raw = run_filter(params, &returns.values, init);
    if raw
        .sigma2
        .iter()
        .chain(std::iter::once(&raw.next))
        .any(|s| !(*s > 0.0) || !s.is_finite())
    {
        return Err(RiskError::Degenerate("variance path left (0, inf)".into()));
    }
    Ok(VariancePath {
        dates: returns.dates.clone(),
        residuals: returns.values.iter().map(|r| r - params.mu).collect(),
        sigma2: raw.sigma2,
        next_sigma2: raw.next,
        clamped: raw.clamped,
    })
}

fn path_log_likelihood(p: &ModelParams, returns: &[f64], sigma2_init: f64) -> f64 {
    let raw = run_filter(p, returns, sigma2_init);
    let mut ll = 0.0;
    for (r, s2) in returns.iter().zip(&raw.sigma2) {
        if !(*s2 > 0.0) || !s2.is_finite() {
            return f64::NEG_INFINITY;
        }
        ll += p.dist.ln_pdf((r - p.mu) / s2.sqrt()) - 0.5 * s2.ln();
    }
    ll
}

/// Gaussian-or-skewed-t log-likelihood of `returns` under `params`.
pub fn log_likelihood(params: &ModelParams, returns: &ReturnSeries) -> Result<f64> {
    params.validate()?;
    let init = sample_variance(&returns.values);
    Ok(path_log_likelihood(params, &returns.values, init))
}

#[derive(Debug, Clone, Copy)]
pub struct CalibrationOptions {
    /// Random restarts on a cold start.
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            seed: 0x5EED,
            max_iter: 4000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub params: ModelParams,
    pub log_likelihood: f64,
    /// Log-likelihood at the default (fallback) start point.
    pub start_log_likelihood: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Accepted log-likelihood after each simplex iteration of the winning run.
    pub trace: Vec<f64>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Maps between unconstrained coordinates and parameters for one
/// (family, distribution) pair, on unit-variance returns.
struct Coords {
    family: Family,
    kind: DistKind,
}

impl Coords {
    fn n_vol(&self) -> usize {
        match self.family {
            Family::Arch => 2,
            Family::Garch => 3,
            Family::Egarch => 4,
            Family::RiskMetrics => 0,
        }
    }

    fn dim(&self) -> usize {
        self.n_vol() + if self.kind == DistKind::SkewedT { 2 } else { 0 }
    }

    fn decode(&self, x: &[f64]) -> Option<ModelParams> {
        let k = self.n_vol();
        let dist = match self.kind {
            DistKind::Normal => InnovationDistribution::Normal,
            DistKind::SkewedT => {
                let nu = NU_MIN + (NU_MAX - NU_MIN) * logistic(x[k]);
                let gamma = x[k + 1].exp();
                if !(SKEW_MIN..=SKEW_MAX).contains(&gamma) {
                    return None;
                }
                InnovationDistribution::skewed_t(nu, gamma).ok()?
            }
        };
        let p = match self.family {
            Family::Arch => ModelParams::arch(x[0].exp(), x[1].exp(), dist),
            Family::Garch => {
                let (ea, eb) = (x[1].exp(), x[2].exp());
                let denom = 1.0 + ea + eb;
                ModelParams::garch(x[0].exp(), ea / denom, eb / denom, dist)
            }
            Family::Egarch => ModelParams::egarch(x[0], x[1], x[3].tanh(), x[2], dist),
            Family::RiskMetrics => Ok(ModelParams::riskmetrics(dist)),
        };
        p.ok()
    }

    fn encode(&self, p: &ModelParams) -> Vec<f64> {
        let mut x = match self.family {
            Family::Arch => vec![p.omega.ln(), p.alpha.max(1e-8).ln()],
            Family::Garch => {
                let rest = 1.0 - p.alpha - p.beta;
                vec![p.omega.ln(), (p.alpha / rest).ln(), (p.beta / rest).ln()]
            }
            Family::Egarch => vec![p.omega, p.alpha, p.gamma_lev, p.beta.clamp(-0.9999, 0.9999).atanh()],
            Family::RiskMetrics => vec![],
        };
        if self.kind == DistKind::SkewedT {
            let (nu, gamma) = p.dist.shape().unwrap_or((8.0, 1.0));
            let u = ((nu - NU_MIN) / (NU_MAX - NU_MIN)).clamp(1e-6, 1.0 - 1e-6);
            x.push(logit(u));
            x.push(gamma.clamp(SKEW_MIN * 1.01, SKEW_MAX * 0.99).ln());
        }
        x
    }

    /// Default start on unit-variance returns.
    fn fallback(&self) -> Vec<f64> {
        let mut x = match self.family {
            Family::Arch => vec![0.7f64.ln(), 0.3f64.ln()],
            Family::Garch => vec![0.02f64.ln(), (0.08f64 / 0.02).ln(), (0.9f64 / 0.02).ln()],
            Family::Egarch => vec![0.0, 0.1, -0.05, 0.95f64.atanh()],
            Family::RiskMetrics => vec![],
        };
        if self.kind == DistKind::SkewedT {
            x.push(logit((8.0 - NU_MIN) / (NU_MAX - NU_MIN)));
            x.push(0.0);
        }
        x
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = match self.family {
            Family::Arch => {
                let a: f64 = rng.random_range(0.05..0.8);
                vec![(1.0 - a.min(0.95)).max(0.05).ln(), a.ln()]
            }
            Family::Garch => {
                let a: f64 = rng.random_range(0.02..0.25);
                let b: f64 = rng.random_range(0.5..(0.98 - a));
                let rest = 1.0 - a - b;
                vec![rest.ln(), (a / rest).ln(), (b / rest).ln()]
            }
            Family::Egarch => {
                let b: f64 = rng.random_range(0.5..0.99);
                vec![0.0, rng.random_range(0.0..0.3), rng.random_range(-0.2..0.1), b.atanh()]
            }
            Family::RiskMetrics => vec![],
        };
        if self.kind == DistKind::SkewedT {
            let nu: f64 = rng.random_range(4.0..20.0);
            x.push(logit((nu - NU_MIN) / (NU_MAX - NU_MIN)));
            x.push(rng.random_range(0.7f64..1.4).ln());
        }
        x
    }
}

/// Rescales unit-variance parameters back to returns with standard
/// deviation `scale`.
fn unscale(p: ModelParams, scale: f64) -> ModelParams {
    let s2 = scale * scale;
    let mut out = p;
    match p.family {
        Family::Arch | Family::Garch => out.omega = p.omega * s2,
        Family::Egarch => out.omega = p.omega + (1.0 - p.beta) * s2.ln(),
        Family::RiskMetrics => {}
    }
    out.mu = p.mu * scale;
    out
}

fn to_unit(p: &ModelParams, scale: f64) -> ModelParams {
    let s2 = scale * scale;
    let mut out = *p;
    match p.family {
        Family::Arch | Family::Garch => out.omega = p.omega / s2,
        Family::Egarch => out.omega = p.omega - (1.0 - p.beta) * s2.ln(),
        Family::RiskMetrics => {}
    }
    out.mu = p.mu / scale;
    out
}

/// Maximum-likelihood calibration with conditional mean fixed at zero.
///
/// Starts from the default point plus `restarts` seeded random points, or
/// from `warm_start` and the default point when one is supplied. The run
/// with the highest likelihood wins and is polished with a second simplex.
pub fn calibrate_mle(
    family: Family,
    returns: &ReturnSeries,
    dist_kind: DistKind,
    warm_start: Option<&ModelParams>,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    if returns.len() < MIN_CALIBRATION_LEN {
        return Err(RiskError::InsufficientData {
            needed: MIN_CALIBRATION_LEN,
            have: returns.len(),
        });
    }
    let var = sample_variance(&returns.values);
    if !(var > 0.0) || !var.is_finite() {
        return Err(RiskError::Degenerate("zero-variance return window".into()));
    }
    let scale = var.sqrt();
    let unit: Vec<f64> = returns.values.iter().map(|r| r / scale).collect();
    let unit_init = sample_variance(&unit);
    // ll(original) = ll(unit) - n ln(scale)
    let jacobian = unit.len() as f64 * scale.ln();

    let coords = Coords {
        family,
        kind: dist_kind,
    };
    let objective = |x: &[f64]| -> f64 {
        match coords.decode(x) {
            Some(p) => {
                let ll = path_log_likelihood(&p, &unit, unit_init);
                if ll.is_finite() {
                    -ll
                } else {
                    f64::INFINITY
                }
            }
            None => f64::INFINITY,
        }
    };

    let fallback = coords.fallback();
    let start_ll = -objective(&fallback) - jacobian;

    if coords.dim() == 0 {
        let params = coords.decode(&[]).expect("riskmetrics params are fixed");
        return Ok(Calibration {
            params: unscale(params, scale),
            log_likelihood: start_ll,
            start_log_likelihood: start_ll,
            converged: true,
            evaluations: 1,
            trace: vec![start_ll],
        });
    }

    let mut starts = Vec::new();
    if let Some(w) = warm_start.filter(|w| w.family == family && w.dist.kind() == dist_kind) {
        starts.push(coords.encode(&to_unit(w, scale)));
    }
    starts.push(fallback);
    if warm_start.is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, family as u64));
        for _ in 0..opts.restarts {
            starts.push(coords.random_start(&mut rng));
        }
    }

    let simplex = SimplexOptions {
        max_iter: opts.max_iter,
        f_tol: 1e-11,
        x_tol: 1e-6,
        initial_step: 0.3,
    };
    let mut best: Option<crate::numeric::SimplexResult> = None;
    let mut evaluations = 0;
    for s in &starts {
        let r = nelder_mead(objective, s, simplex);
        evaluations += r.iterations;
        if best.as_ref().is_none_or(|b| r.fx < b.fx) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one start");
    if best.fx.is_finite() {
        let polished = nelder_mead(
            objective,
            &best.x,
            SimplexOptions {
                initial_step: 0.05,
                ..simplex
            },
        );
        evaluations += polished.iterations;
        if polished.fx <= best.fx {
            let mut trace = best.trace.clone();
            trace.extend(polished.trace.iter().map(|v| v.min(best.fx)));
            best = crate::numeric::SimplexResult {
                trace,
                converged: polished.converged || best.converged,
                ..polished
            };
        }
    }

    let best_ll = -best.fx - jacobian;
    let params = match coords.decode(&best.x) {
        Some(p) if best.fx.is_finite() && best.converged => p,
        _ => {
            return Err(RiskError::Calibration {
                restarts: starts.len(),
                best_loglik: best_ll,
                reason: if best.fx.is_finite() {
                    "simplex did not converge".into()
                } else {
                    "no start produced a finite likelihood".into()
                },
            })
        }
    };
    Ok(Calibration {
        params: unscale(params, scale),
        log_likelihood: best_ll,
        start_log_likelihood: start_ll,
        converged: best.converged,
        evaluations,
        trace: best.trace.iter().map(|f| -f - jacobian).collect(),
    })
}

/// Simulates `n` returns from `params` with `sigma2_0` as the first variance.
/// Returns `(returns, sigma2)`.
pub fn simulate(params: &ModelParams, n: usize, sigma2_0: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    let z = params.dist.sample(n, seed);
    let abs_mean = params.dist.abs_mean();
    let mut s2 = sigma2_0;
    let mut returns = Vec::with_capacity(n);
    let mut sigma2 = Vec::with_capacity(n);
    for zt in z {
        sigma2.push(s2);
        let eps = s2.sqrt() * zt;
        returns.push(params.mu + eps);
        s2 = match params.family {
            Family::Arch => params.omega + params.alpha * eps * eps,
            Family::Garch => garch_step(params, s2, zt),
            Family::Egarch => egarch_step(params, abs_mean, s2, eps)
                .clamp(-EGARCH_LOGVAR_BOUND, EGARCH_LOGVAR_BOUND)
                .exp(),
            Family::RiskMetrics => riskmetrics_next_var(s2, eps),
        };
    }
    Ok((returns, sigma2))
}

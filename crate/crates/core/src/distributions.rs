//! Standardized innovation laws: the standard normal and a skewed Student's t
//! rescaled to zero mean and unit variance.
//!
//! The skewed t is the two-piece inverse-scale construction on a unit-variance
//! Student's t density `g`:
//!
//! ```text
//! f_X(x) = 2 / (gamma + 1/gamma) * { g(x / gamma)  x >= 0
//!                                  { g(gamma * x)  x <  0
//! ```
//!
//! followed by `Z = (X - m) / s` with `m`, `s` the mean and standard deviation
//! of `X`. `gamma = 1` recovers the symmetric standardized t; `gamma > 1`
//! skews to the right.

use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, RiskError};
use crate::numeric::invert_cdf;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Which innovation family a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    Normal,
    SkewedT,
}

impl DistKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistKind::Normal => "normal",
            DistKind::SkewedT => "skewed_t",
        }
    }
}

/// Skewed Student's t with precomputed standardization constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewedT {
    nu: f64,
    gamma: f64,
    /// `sqrt((nu - 2) / nu)`: scale taking a standard t to unit variance.
    c: f64,
    mean_x: f64,
    sd_x: f64,
    /// `ln K - ln c`, with `K` the standard t normalizer.
    ln_g_norm: f64,
    /// `ln(2 / (gamma + 1/gamma))`.
    ln_skew_norm: f64,
    student: StudentsT,
}

impl SkewedT {
    pub fn new(nu: f64, gamma: f64) -> Result<Self> {
        if !(nu > 2.0) || !nu.is_finite() {
            return Err(RiskError::InvalidParams(format!("nu must exceed 2, got {nu}")));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(RiskError::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
        let c = ((nu - 2.0) / nu).sqrt();
        let ln_k = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * PI).ln();
        // E|V| for unit-variance t.
        let m1 = 2.0 * (nu - 2.0).sqrt() / (PI.sqrt() * (nu - 1.0))
            * (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp();
        let inv = 1.0 / gamma;
        let mean_x = m1 * (gamma - inv);
        let var_x = gamma * gamma + inv * inv - 1.0 - mean_x * mean_x;
        let student = StudentsT::new(0.0, 1.0, nu).map_err(|e| RiskError::InvalidParams(format!("student t: {e}")))?;
        Ok(Self {
            nu,
            gamma,
            c,
            mean_x,
            sd_x: var_x.sqrt(),
            ln_g_norm: ln_k - c.ln(),
            ln_skew_norm: (2.0 / (gamma + inv)).ln(),
            student,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn ln_g(&self, v: f64) -> f64 {
        let w = v / self.c;
        self.ln_g_norm - 0.5 * (self.nu + 1.0) * (w * w / self.nu).ln_1p()
    }

    fn g_cdf(&self, v: f64) -> f64 {
        self.student.cdf(v / self.c)
    }

    /// `int_{-inf}^{v} u g(u) du` for the unit-variance t.
    fn g_partial(&self, v: f64) -> f64 {
        let w = v / self.c;
        let ln_t = self.ln_g_norm + self.c.ln() - 0.5 * (self.nu + 1.0) * (w * w / self.nu).ln_1p();
        -self.c * (self.nu + w * w) / (self.nu - 1.0) * ln_t.exp()
    }

    fn x_ln_pdf(&self, x: f64) -> f64 {
        let y = if x >= 0.0 { x / self.gamma } else { x * self.gamma };
        self.ln_skew_norm + self.ln_g(y)
    }

    fn x_cdf(&self, x: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        if x < 0.0 {
            2.0 / (1.0 + g2) * self.g_cdf(self.gamma * x)
        } else {
            1.0 / (1.0 + g2) + 2.0 * g2 / (1.0 + g2) * (self.g_cdf(x / self.gamma) - 0.5)
        }
    }

    fn x_partial(&self, x: f64) -> f64 {
        let scale = 2.0 / (self.gamma + 1.0 / self.gamma);
        let g2 = self.gamma * self.gamma;
        if x < 0.0 {
            scale / g2 * self.g_partial(self.gamma * x)
        } else {
            scale / g2 * self.g_partial(0.0) + scale * g2 * (self.g_partial(x / self.gamma) - self.g_partial(0.0))
        }
    }

    fn to_x(self, z: f64) -> f64 {
        self.mean_x + self.sd_x * z
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        self.sd_x.ln() + self.x_ln_pdf(self.to_x(z))
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.x_cdf(self.to_x(z))
    }

    /// `E[Z 1{Z <= q}]`.
    pub fn partial_mean(&self, q: f64) -> f64 {
        let x = self.to_x(q);
        (self.x_partial(x) - self.mean_x * self.x_cdf(x)) / self.sd_x
    }

    fn sample_one(&self, rng: &mut ChaCha8Rng, student: &StudentT<f64>, coin: f64) -> f64 {
        let v = self.c * student.sample(rng).abs();
        let g2 = self.gamma * self.gamma;
        let x = if coin < g2 / (1.0 + g2) {
            self.gamma * v
        } else {
            -v / self.gamma
        };
        (x - self.mean_x) / self.sd_x
    }
}

/// Zero-mean, unit-variance innovation law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnovationDistribution {
    Normal,
    SkewedT(SkewedT),
}

impl InnovationDistribution {
    pub fn skewed_t(nu: f64, gamma: f64) -> Result<Self> {
        SkewedT::new(nu, gamma).map(Self::SkewedT)
    }

    pub fn kind(&self) -> DistKind {
        match self {
            Self::Normal => DistKind::Normal,
            Self::SkewedT(_) => DistKind::SkewedT,
        }
    }

    /// `(nu, gamma)` for the skewed t.
    pub fn shape(&self) -> Option<(f64, f64)> {
        match self {
            Self::Normal => None,
            Self::SkewedT(s) => Some((s.nu, s.gamma)),
        }
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        match self {
            Self::Normal => -LN_SQRT_2PI - 0.5 * z * z,
            Self::SkewedT(s) => s.ln_pdf(z),
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.ln_pdf(z).exp()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            Self::Normal => 0.5 * statrs::function::erf::erfc(-z / SQRT_2),
            Self::SkewedT(s) => s.cdf(z),
        }
    }

    /// Inverse CDF, accurate to `1e-9` in probability.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(RiskError::InvalidArgument(format!(
                "probability must lie in (0, 1), got {p}"
            )));
        }
        let guess = Normal::standard().inverse_cdf(p);
        Ok(invert_cdf(|z| self.cdf(z), |z| self.pdf(z), p, guess))
    }

    /// `E[Z 1{Z <= q}]`.
    pub fn partial_mean(&self, q: f64) -> f64 {
        match self {
            Self::Normal => -(-LN_SQRT_2PI - 0.5 * q * q).exp(),
            Self::SkewedT(s) => s.partial_mean(q),
        }
    }

    /// `E[Z | Z <= q_alpha]`: the mean of the lower `alpha` tail (negative).
    pub fn tail_expectation(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(RiskError::InvalidArgument(format!(
                "tail level must lie in (0, 0.5), got {alpha}"
            )));
        }
        let q = self.quantile(alpha)?;
        Ok(self.partial_mean(q) / alpha)
    }

    /// `E|Z|`, the centering term of the EGARCH recursion.
    pub fn abs_mean(&self) -> f64 {
        match self {
            Self::Normal => (2.0 / PI).sqrt(),
            Self::SkewedT(_) => -2.0 * self.partial_mean(0.0),
        }
    }

    pub fn log_likelihood(&self, standardized_residuals: &[f64]) -> f64 {
        match self {
            Self::Normal => {
                let ss: f64 = standardized_residuals.iter().map(|z| z * z).sum();
                -LN_SQRT_2PI * standardized_residuals.len() as f64 - 0.5 * ss
            }
            Self::SkewedT(s) => standardized_residuals.iter().map(|&z| s.ln_pdf(z)).sum(),
        }
    }

    /// `n` deterministic draws from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    pub fn sample_with(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        match self {
            Self::Normal => (0..n).map(|_| StandardNormal.sample(rng)).collect(),
            Self::SkewedT(s) => {
                let student = StudentT::new(s.nu).expect("nu validated at construction");
                (0..n)
                    .map(|_| {
                        let coin: f64 = rand::Rng::random(rng);
                        s.sample_one(rng, &student, coin)
                    })
                    .collect()
            }
        }
    }
}

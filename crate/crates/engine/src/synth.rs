//! Synthetic panels for tests and demos.

use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tailrisk_core::distributions::InnovationDistribution;
use tailrisk_core::volatility::{simulate, ModelParams};

use crate::error::{EngineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// GARCH(1,1) skewed-t daily returns, target column only.
    Garch,
    /// Target driven by a lagged two-variable autoregressive chain, with
    /// sparse gaps in one explanatory column.
    Chain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPanel {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    /// Column-major values; `None` is a gap.
    pub columns: Vec<Vec<Option<f64>>>,
}

/// Weekdays from 2000-01-03.
pub fn business_days(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

fn prices_from(returns: impl IntoIterator<Item = f64>) -> Vec<Option<f64>> {
    let mut level: f64 = 100.0;
    std::iter::once(Some(level))
        .chain(returns.into_iter().map(|r| {
            level *= r.exp();
            Some(level)
        }))
        .collect()
}

pub fn generate(preset: Preset, n: usize, seed: u64) -> Result<SynthPanel> {
    if n < 2 {
        return Err(EngineError::Config("synthetic panels need at least 2 days".into()));
    }
    let dates = business_days(n);
    match preset {
        Preset::Garch => {
            let dist = InnovationDistribution::skewed_t(6.0, 0.9)?;
            let params = ModelParams::garch(2e-6, 0.08, 0.9, dist)?;
            let (r, _) = simulate(&params, n - 1, 1e-4, seed)?;
            Ok(SynthPanel {
                dates,
                names: vec!["price".into()],
                columns: vec![prices_from(r)],
            })
        }
        Preset::Chain => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
            let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
            let mut r = vec![0.0; n - 1];
            for t in 1..n {
                x[t] = 0.5 * x[t - 1] + e(&mut rng);
                y[t] = 0.6 * x[t - 1] + 0.4 * y[t - 1] + e(&mut rng);
                r[t - 1] = 0.003 * y[t - 1] + 0.01 * e(&mut rng);
            }
            let gaps: Vec<Option<f64>> = x
                .iter()
                .enumerate()
                .map(|(t, v)| (t == 0 || rng.random::<f64>() > 0.01).then_some(*v))
                .collect();
            Ok(SynthPanel {
                dates,
                names: vec!["price".into(), "x".into(), "y".into()],
                columns: vec![prices_from(r), gaps, y.into_iter().map(Some).collect()],
            })
        }
    }
}

pub fn write_csv(panel: &SynthPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| EngineError::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| EngineError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(std::iter::once("date").chain(panel.names.iter().map(String::as_str)))?;
    for (i, d) in panel.dates.iter().enumerate() {
        let row = std::iter::once(d.to_string()).chain(
            panel
                .columns
                .iter()
                .map(|c| c[i].map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(row)?;
    }
    w.flush().map_err(|e| EngineError::io(path, e))?;
    Ok(())
}

//! The rolling study: per-date ES and stressed ES forecasts for every model,
//! then backtests and error scores per (model, metric) stream.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tailrisk_core::backtests::{
    du_escanciano, du_escanciano_mc, parametric_pit, pit_transform, traffic_light, z_cb, z_mb, BacktestOutcome,
    Decision, McSettings, ZmbVariant,
};
use tailrisk_core::data::{
    carry_forward_fill, load_panel, overlapping_h_returns, ReturnSeries, DEFAULT_MAX_LEADING_FRACTION,
};
use tailrisk_core::distributions::DistKind;
use tailrisk_core::numeric::derive_seed;
use tailrisk_core::risk::{
    bn_augmented_window, delta_normal_with_law, empirical_pit, empirical_with_law, make_forecast_record,
    parametric_law, parametric_var_es, CalibratedModel, ForecastConfig, ForecastRecord, PredictiveLaw, VarEs,
};
use tailrisk_core::scores::{rank_models, score, Metric, ScoreReport};
use tailrisk_core::stressed::build_stressed_window;
use tailrisk_core::volatility::{CalibrationOptions, Family, ModelParams};
use tailrisk_core::RiskError;
use tailrisk_dbn::{
    fit_linear_gaussian, forecast_one_day, learn, select_structure, Algorithm, DbnStructure, LearnSettings,
    SlicedDataset,
};

use crate::audit::{AuditEntry, AuditLog, Market, PastView};
use crate::config::StudyConfig;
use crate::error::{EngineError, Result};
use crate::models::ModelSpec;

/// A forecast that could not be produced. The study continues without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub date: NaiveDate,
    pub model: String,
    pub metric: Metric,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Stream {
    pub model: ModelSpec,
    pub metric: Metric,
    pub records: Vec<ForecastRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutcomeRow {
    pub model: String,
    pub metric: Metric,
    #[serde(flatten)]
    pub outcome: BacktestOutcome,
    /// Set for tests run outside the protocol the model was designed for
    /// (Du-Escanciano on the DBN-augmented empirical PITs).
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub outside_protocol: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreRow {
    #[serde(flatten)]
    pub report: ScoreReport,
    /// Position within the metric's ranking (1 = most accurate).
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbnSummary {
    pub model: String,
    pub relearns: usize,
    pub final_structure: Option<String>,
    pub final_ci_alpha: Option<f64>,
    pub diagnostics: Vec<String>,
}

/// Loaded market data and the resolved forecast-date range.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub market: Market,
    /// First and last (inclusive) forecast rows.
    pub first: usize,
    pub last: usize,
    /// Requested dates dropped because their realized horizon runs past the
    /// end of the panel.
    pub clipped: Vec<NaiveDate>,
    pub warnings: Vec<String>,
}

impl Prepared {
    pub fn forecast_dates(&self) -> &[NaiveDate] {
        &self.market.panel.dates[self.first..=self.last]
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub forecast_dates: Vec<NaiveDate>,
    pub clipped_dates: Vec<NaiveDate>,
    pub streams: Vec<Stream>,
    pub outcomes: Vec<OutcomeRow>,
    pub scores: Vec<ScoreRow>,
    pub failures: Vec<Failure>,
    pub warnings: Vec<String>,
    pub dbn: Vec<DbnSummary>,
}

impl StudyResult {
    pub fn n_records(&self) -> usize {
        self.streams.iter().map(|s| s.records.len()).sum()
    }
}

/// Loads and fills the panel and checks the out-of-sample range against it.
pub fn prepare(cfg: &StudyConfig) -> Result<Prepared> {
    let panel = load_panel(&cfg.panel.path, &cfg.schema())?;
    let (filled, fill) = carry_forward_fill(&panel)?;
    let warnings = fill
        .warnings(cfg.window_len, DEFAULT_MAX_LEADING_FRACTION)
        .iter()
        .map(|w| {
            format!(
                "column `{}` starts {} rows late ({:.1}% of the training window)",
                w.column,
                w.leading_missing,
                100.0 * w.fraction
            )
        })
        .collect();
    let market = Market::new(filled)?;
    let dates = &market.panel.dates;
    let first = market.panel.index_on_or_after(cfg.out_of_sample.start);
    // One window of returns to calibrate on; DBN models also need the
    // window before it for their first training period.
    let needed = if cfg.models.iter().any(ModelSpec::is_dbn) {
        2 * cfg.window_len + 1
    } else {
        cfg.window_len + 1
    };
    if first < needed {
        return Err(EngineError::Config(format!(
            "out-of-sample start {} leaves {} prior rows; need at least {needed}",
            cfg.out_of_sample.start, first
        )));
    }
    let requested_last = match cfg.out_of_sample.end {
        Some(end) => dates.partition_point(|d| *d <= end).saturating_sub(1),
        None => market.len() - 1,
    };
    let complete = market.len().saturating_sub(cfg.horizon_days);
    let last = requested_last.min(complete);
    if first >= market.len() || first > last {
        return Err(EngineError::Config(format!(
            "no forecast date with a complete {}-day horizon in the requested range",
            cfg.horizon_days
        )));
    }
    let clipped = if requested_last > last {
        dates[last + 1..=requested_last].to_vec()
    } else {
        Vec::new()
    };
    Ok(Prepared {
        market,
        first,
        last,
        clipped,
        warnings,
    })
}

/// Stable 64-bit FNV-1a, used to key random streams by name so seeds do not
/// depend on the order models are listed in.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn stream_seed(seed: u64, model: &ModelSpec, metric: Metric) -> u64 {
    derive_seed(seed, fnv1a(&format!("{}/{}", model.id(), metric.as_str())))
}

/// Estimator output in return units: the forecast, its predictive law and
/// the PIT of the realized return.
struct Estimate {
    forecast: VarEs,
    law: PredictiveLaw,
    pit: f64,
}

fn law_pit(law: &PredictiveLaw, window: &[f64], x: f64) -> f64 {
    match law {
        PredictiveLaw::Parametric { loc, scale, dist, .. } => parametric_pit(*loc, *scale, dist, x),
        PredictiveLaw::Empirical { .. } => empirical_pit(window, x),
    }
}

fn empirical(window: &ReturnSeries, alpha: f64, realized: f64) -> tailrisk_core::Result<Estimate> {
    let (forecast, law) = empirical_with_law(&window.values, alpha)?;
    let pit = law_pit(&law, &window.values, realized);
    Ok(Estimate { forecast, law, pit })
}

fn delta_normal(window: &ReturnSeries, alpha: f64, realized: f64) -> tailrisk_core::Result<Estimate> {
    let (forecast, law) = delta_normal_with_law(&window.values, alpha)?;
    let pit = law_pit(&law, &window.values, realized);
    Ok(Estimate { forecast, law, pit })
}

fn volatility(
    family: Family,
    dist: DistKind,
    window: &ReturnSeries,
    alpha: f64,
    realized: f64,
    warm: &mut Option<ModelParams>,
    opts: &CalibrationOptions,
) -> tailrisk_core::Result<Estimate> {
    let fitted = CalibratedModel::fit(family, dist, window, warm.as_ref(), opts);
    let model = match fitted {
        Ok(m) => m,
        Err(e) => {
            *warm = None;
            return Err(e);
        }
    };
    *warm = Some(model.calibration.params);
    let forecast = parametric_var_es(&model, alpha)?;
    let law = parametric_law(&model, alpha)?;
    let pit = law_pit(&law, &window.values, realized);
    if !(forecast.es.is_finite() && forecast.var.is_finite()) {
        return Err(RiskError::InvalidForecast(format!("non-finite forecast {forecast:?}")));
    }
    Ok(Estimate { forecast, law, pit })
}

/// Daily-return window the model is calibrated on for `metric` at the view's
/// bound: the most recent `len` days, or the `len` most severe days so far.
fn daily_window(view: &PastView, metric: Metric, date: NaiveDate, len: usize) -> Result<ReturnSeries> {
    match metric {
        Metric::Es => view.daily_returns(len),
        Metric::Ses => Ok(build_stressed_window(&view.all_daily_returns()?, date, len)?.daily()),
    }
}

#[derive(Debug, Default)]
struct DbnState {
    structure: Option<DbnStructure>,
    columns: Vec<usize>,
    since_learn: usize,
    relearns: usize,
    diagnostics: Vec<String>,
}

/// One-day-ahead log-return forecast for the target from a DBN trained on
/// the `window_len` panel rows before the bound.
fn dbn_return_forecast(
    algorithm: Algorithm,
    view: &PastView,
    date: NaiveDate,
    cfg: &StudyConfig,
    state: &mut DbnState,
) -> Result<f64> {
    let bound = view.bound();
    let w = cfg.window_len;
    let rows = bound - w..bound;
    let mut columns = Vec::new();
    let mut raw = Vec::new();
    let mut dropped = Vec::new();
    for col in 0..view.n_columns() {
        let values = view.column(col, rows.clone())?;
        let usable = values.iter().all(Option::is_some) && {
            let v: Vec<f64> = values.iter().map(|x| x.unwrap_or(f64::NAN)).collect();
            let varies = |s: &[f64]| s.iter().any(|x| *x != s[0]);
            varies(&v[..w - 1]) && varies(&v[1..])
        };
        if usable {
            columns.push(col);
            raw.push(values.iter().map(|x| x.unwrap_or(f64::NAN)).collect::<Vec<f64>>());
        } else if col == 0 {
            return Err(EngineError::Risk(RiskError::Degenerate(
                "target has gaps or is constant in the training window".into(),
            )));
        } else {
            dropped.push(view.column_name(col).to_string());
        }
    }
    let names: Vec<String> = columns.iter().map(|&c| view.column_name(c).to_string()).collect();
    let data = SlicedDataset::new(names, &raw)?;
    if columns != state.columns || state.structure.is_none() || state.since_learn >= cfg.dbn.relearn_every {
        if columns != state.columns && !dropped.is_empty() {
            state.diagnostics.push(format!(
                "{date}: {} column(s) unusable in the training window: {}",
                dropped.len(),
                dropped.join(", ")
            ));
        }
        let candidates = cfg
            .dbn
            .ci_alpha_grid
            .iter()
            .map(|&ci_alpha| {
                learn(
                    algorithm,
                    &data,
                    &LearnSettings {
                        ci_alpha,
                        max_cond: cfg.dbn.max_cond,
                    },
                )
            })
            .collect::<tailrisk_dbn::Result<Vec<_>>>()?;
        let (best, _) = select_structure(&data, &candidates)?;
        for d in &best.diagnostics {
            state.diagnostics.push(format!("{date}: {d}"));
        }
        state.structure = Some(best);
        state.columns = columns;
        state.since_learn = 0;
        state.relearns += 1;
    }
    let structure = state.structure.as_ref().expect("structure learned above");
    let model = fit_linear_gaussian(&data, structure)?;
    let evidence: Vec<Option<f64>> = raw.iter().map(|c| Some(c[w - 1])).collect();
    let level = forecast_one_day(&model, &evidence, 0)?;
    state.since_learn += 1;
    let prev = raw[0][w - 1];
    if !(level > 0.0 && level.is_finite()) {
        return Err(EngineError::Risk(RiskError::InvalidForecast(format!(
            "non-positive target level forecast {level}"
        ))));
    }
    Ok((level / prev).ln())
}

struct ModelRun {
    streams: Vec<Stream>,
    failures: Vec<Failure>,
    dbn: Option<DbnSummary>,
}

fn run_model(model: ModelSpec, prep: &Prepared, cfg: &StudyConfig, seed: u64, audit: Option<&AuditLog>) -> ModelRun {
    let market = &prep.market;
    let fc: ForecastConfig = cfg.forecast_config();
    let (w, h, alpha) = (cfg.window_len, cfg.horizon_days, cfg.alpha);
    let id = model.id();
    let mut records: Vec<Vec<ForecastRecord>> = vec![Vec::new(); cfg.metrics.len()];
    let mut failures = Vec::new();
    let mut warm: Vec<Option<ModelParams>> = vec![None; cfg.metrics.len()];
    let opts: Vec<CalibrationOptions> = cfg
        .metrics
        .iter()
        .map(|&m| CalibrationOptions {
            seed: stream_seed(seed, &model, m),
            ..CalibrationOptions::default()
        })
        .collect();
    let mut dbn = DbnState::default();
    for i in prep.first..=prep.last {
        let date = market.panel.dates[i];
        let realized = market.realized(i, h).expect("forecast rows have complete horizons");
        let view = market.view(i);
        let bn_return = match model {
            ModelSpec::Dbn(alg) => {
                Some(dbn_return_forecast(alg, &view, date, cfg, &mut dbn).map_err(|e| e.to_string()))
            }
            _ => None,
        };
        for (k, &metric) in cfg.metrics.iter().enumerate() {
            let estimate: Result<Estimate> = (|| {
                Ok(match model {
                    ModelSpec::Hs => empirical(
                        &overlapping_h_returns(&daily_window(&view, metric, date, w)?, h)?,
                        alpha,
                        realized,
                    )?,
                    ModelSpec::DeltaNormal => delta_normal(
                        &overlapping_h_returns(&daily_window(&view, metric, date, w)?, h)?,
                        alpha,
                        realized,
                    )?,
                    ModelSpec::Volatility(family, dist) => {
                        let window = overlapping_h_returns(&daily_window(&view, metric, date, w)?, h)?;
                        volatility(family, dist, &window, alpha, realized, &mut warm[k], &opts[k])?
                    }
                    ModelSpec::Dbn(_) => {
                        let forecast = match bn_return.as_ref().expect("set for DBN models") {
                            Ok(r) => *r,
                            Err(e) => return Err(EngineError::Upstream(format!("dbn forecast unavailable: {e}"))),
                        };
                        let hist = daily_window(&view, metric, date, w - 1)?;
                        empirical(&bn_augmented_window(&hist, forecast, date, &fc)?, alpha, realized)?
                    }
                })
            })();
            let outcome = estimate.and_then(|e| {
                let mut rec = make_forecast_record(date, &id, e.forecast, realized, &fc)?;
                rec.pit = Some(e.pit);
                rec.law = Some(e.law);
                Ok(rec)
            });
            match outcome {
                Ok(rec) => records[k].push(rec),
                Err(e) => failures.push(Failure {
                    date,
                    model: id.clone(),
                    metric,
                    stage: failure_stage(&model, &e),
                    message: failure_message(e),
                }),
            }
        }
        if let Some(log) = audit {
            log.record(AuditEntry {
                model: id.clone(),
                forecast_date: date,
                latest_date_read: view.latest_date_read(),
            });
        }
    }
    let streams = cfg
        .metrics
        .iter()
        .zip(records)
        .map(|(&metric, records)| Stream { model, metric, records })
        .collect();
    let dbn = model.is_dbn().then(|| DbnSummary {
        model: id.clone(),
        relearns: dbn.relearns,
        final_structure: dbn.structure.as_ref().map(DbnStructure::to_arc_list),
        final_ci_alpha: dbn.structure.as_ref().map(|s| s.ci_alpha),
        diagnostics: dbn.diagnostics,
    });
    ModelRun { streams, failures, dbn }
}

fn failure_stage(model: &ModelSpec, e: &EngineError) -> String {
    match (model, e) {
        (ModelSpec::Dbn(_), EngineError::Upstream(_) | EngineError::Dbn(_)) => "dbn".into(),
        (ModelSpec::Volatility(..), EngineError::Risk(RiskError::Calibration { .. })) => "calibration".into(),
        (_, EngineError::Risk(RiskError::InvalidForecast(_))) => "forecast".into(),
        _ => "estimation".into(),
    }
}

fn failure_message(e: EngineError) -> String {
    match e {
        EngineError::Upstream(m) => m,
        other => other.to_string(),
    }
}

fn unavailable(test_id: &str, stream: &Stream, why: String) -> BacktestOutcome {
    BacktestOutcome {
        test_id: test_id.into(),
        statistic: None,
        p_value: None,
        decision: Decision::CannotPerform,
        zone: None,
        n_breaches: stream.records.iter().filter(|r| r.es_breach).count(),
        n_obs: stream.records.len(),
        diagnostic: Some(why),
    }
}

/// Traffic light on ES breaches, Z_CB, Z_MB (both variants) and
/// Du-Escanciano for one stream.
pub fn backtest_stream(stream: &Stream, cfg: &StudyConfig, seed: u64) -> Vec<OutcomeRow> {
    let b = &cfg.backtests;
    let base = stream_seed(seed, &stream.model, stream.metric);
    let mc = |k: u64| McSettings {
        trials: b.mc_trials,
        seed: derive_seed(base, k),
        significance: b.significance,
    };
    let recs = &stream.records;
    let n = recs.len();
    let de_id = if b.de_monte_carlo {
        "du_escanciano_mc"
    } else {
        "du_escanciano"
    };
    let outcomes: Vec<(&str, std::result::Result<BacktestOutcome, RiskError>)> = if n == 0 {
        ["traffic_light", "z_cb", "z_mb", "z_mb_as_printed", de_id]
            .map(|t| (t, Err(RiskError::InsufficientData { needed: 1, have: 0 })))
            .into()
    } else {
        let pv = cfg.portfolio_value;
        let de = pit_transform(recs).and_then(|pit| {
            if b.de_monte_carlo {
                du_escanciano_mc(&pit, cfg.alpha, b.de_lags, &mc(4))
            } else {
                du_escanciano(&pit, cfg.alpha, b.de_lags, b.significance)
            }
        });
        vec![
            (
                "traffic_light",
                traffic_light(recs.iter().filter(|r| r.es_breach).count(), n, cfg.alpha),
            ),
            ("z_cb", z_cb(recs, pv, &mc(1))),
            ("z_mb", z_mb(recs, cfg.alpha, ZmbVariant::RealizedPnl, pv, &mc(2))),
            (
                "z_mb_as_printed",
                z_mb(recs, cfg.alpha, ZmbVariant::AsPrinted, pv, &mc(3)),
            ),
            (de_id, de),
        ]
    };
    outcomes
        .into_iter()
        .map(|(test_id, r)| {
            let outcome = r.unwrap_or_else(|e| unavailable(test_id, stream, e.to_string()));
            OutcomeRow {
                model: stream.model.id(),
                metric: stream.metric,
                outside_protocol: stream.model.is_dbn() && outcome.test_id.starts_with("du_escanciano"),
                outcome,
            }
        })
        .collect()
}

fn score_streams(streams: &[Stream], metrics: &[Metric], warnings: &mut Vec<String>) -> Vec<ScoreRow> {
    let mut rows = Vec::new();
    for &metric in metrics {
        let mut reports = Vec::new();
        for s in streams.iter().filter(|s| s.metric == metric) {
            match score(&s.records, metric) {
                Ok(r) => reports.push(r),
                Err(e) => warnings.push(format!("no {} score for {}: {e}", metric.as_str(), s.model)),
            }
        }
        let ranked = if reports.len() >= 2 {
            rank_models(&reports).expect("same-metric reports")
        } else {
            reports
        };
        rows.extend(
            ranked
                .into_iter()
                .enumerate()
                .map(|(i, report)| ScoreRow { report, rank: i + 1 }),
        );
    }
    rows
}

/// Runs the study. With an audit log, every (model, date) forecast records
/// the latest date it read.
pub fn run_study(cfg: &StudyConfig, audit: Option<&AuditLog>) -> Result<StudyResult> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let prep = prepare(cfg)?;
    let runs: Vec<ModelRun> = cfg
        .models
        .par_iter()
        .map(|&m| run_model(m, &prep, cfg, seed, audit))
        .collect();
    let mut streams = Vec::new();
    let mut failures = Vec::new();
    let mut dbn = Vec::new();
    for run in runs {
        streams.extend(run.streams);
        failures.extend(run.failures);
        dbn.extend(run.dbn);
    }
    let outcomes: Vec<OutcomeRow> = streams
        .par_iter()
        .map(|s| backtest_stream(s, cfg, seed))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let mut warnings = prep.warnings.clone();
    let scores = score_streams(&streams, &cfg.metrics, &mut warnings);
    Ok(StudyResult {
        config: cfg.clone(),
        forecast_dates: prep.forecast_dates().to_vec(),
        clipped_dates: prep.clipped.clone(),
        streams,
        outcomes,
        scores,
        failures,
        warnings,
        dbn,
    })
}

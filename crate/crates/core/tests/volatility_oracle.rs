mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tailrisk_core::data::ReturnSeries;
use tailrisk_core::distributions::{DistKind, InnovationDistribution};
use tailrisk_core::volatility::{
    arch_next_var, calibrate_mle, filter_variances, simulate, CalibrationOptions, Family, ModelParams,
};

const N: InnovationDistribution = InnovationDistribution::Normal;

fn series(v: Vec<f64>) -> ReturnSeries {
    ReturnSeries::undated(v).unwrap()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (common::mean(a), common::mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn arch_step_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let (w, a, e) = (
            rng.random_range(1e-7..1e-2),
            rng.random_range(0.0..2.0),
            rng.random_range(-0.2..0.2),
        );
        let p = ModelParams::arch(w, a, N).unwrap();
        assert!((arch_next_var(&p, e).unwrap() - (w + a * e * e)).abs() < 1e-15);
    }
}

#[test]
fn garch_filter_replays_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let a: f64 = rng.random_range(0.01..0.3);
        let b: f64 = rng.random_range(0.01..(0.99 - a));
        let w = rng.random_range(1e-7..1e-4);
        let p = ModelParams::garch(w, a, b, N).unwrap();
        let r: Vec<f64> = (0..100).map(|_| rng.random_range(-0.05..0.05)).collect();
        let path = filter_variances(&p, &series(r.clone())).unwrap();
        let mut s2 = common::variance(&r);
        for t in 0..100 {
            assert!((path.sigma2[t] - s2).abs() <= 1e-12 * s2);
            let z = r[t] / s2.sqrt();
            s2 = w + a * s2 * z * z + b * s2;
        }
        assert!((path.next_sigma2 - s2).abs() <= 1e-12 * s2);
    }
}

#[test]
fn egarch_filter_replays_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let abs_mean = (2.0 / std::f64::consts::PI).sqrt();
    for _ in 0..10 {
        let (w, a, g, b) = (
            rng.random_range(-1.0..0.0),
            rng.random_range(0.0..0.3),
            rng.random_range(-0.2..0.2),
            rng.random_range(0.5..0.99),
        );
        let p = ModelParams::egarch(w, a, b, g, N).unwrap();
        let r: Vec<f64> = (0..50).map(|_| rng.random_range(-0.05..0.05)).collect();
        let path = filter_variances(&p, &series(r.clone())).unwrap();
        let mut s2 = common::variance(&r);
        for t in 0..50 {
            assert!((path.sigma2[t] - s2).abs() <= 1e-10 * s2);
            let z = r[t] / s2.sqrt();
            s2 = (w + b * s2.ln() + a * (z.abs() - abs_mean) + g * z).exp();
        }
        assert_eq!(path.clamped, 0);
    }
}

#[test]
fn riskmetrics_filter_replays_ewma() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let r: Vec<f64> = (0..30).map(|_| rng.random_range(-0.05..0.05)).collect();
    let path = filter_variances(&ModelParams::riskmetrics(N), &series(r.clone())).unwrap();
    let mut s2 = common::variance(&r);
    for t in 0..30 {
        assert!((path.sigma2[t] - s2).abs() <= 1e-14);
        s2 = 0.94 * s2 + 0.06 * r[t] * r[t];
    }
}

#[test]
fn riskmetrics_zero_returns_decay_geometrically() {
    // A window of zeros has zero sample variance; prefix one nonzero value
    // and check the geometric decay after it.
    let mut r = vec![0.0; 40];
    r[0] = 0.03;
    let path = filter_variances(&ModelParams::riskmetrics(N), &series(r.clone())).unwrap();
    let s1 = path.sigma2[1];
    for t in 1..40 {
        assert!((path.sigma2[t] - 0.94f64.powi(t as i32 - 1) * s1).abs() < 1e-15);
    }
}

#[test]
fn garch_constant_returns_converge_monotonically() {
    let p = ModelParams::garch(1e-5, 0.1, 0.85, N).unwrap();
    let mut r = vec![0.01; 200];
    r[0] = 0.05;
    let path = filter_variances(&p, &series(r)).unwrap();
    // With eps = c fixed, sigma2 -> (omega + alpha c^2) / (1 - beta).
    let fixed = (1e-5 + 0.1 * 1e-4) / (1.0 - 0.85);
    let gaps: Vec<f64> = path.sigma2[1..].iter().map(|s| (s - fixed).abs()).collect();
    assert!(gaps.windows(2).all(|g| g[1] <= g[0]));
    assert!(gaps.last().unwrap() / fixed < 1e-9);
}

#[test]
fn filtered_variance_tracks_true_path() {
    let p = ModelParams::garch(2e-6, 0.08, 0.9, N).unwrap();
    let (r, true_s2) = simulate(&p, 5000, 1e-4, 5).unwrap();
    let path = filter_variances(&p, &series(r)).unwrap();
    let c = correlation(&path.sigma2[50..], &true_s2[50..]);
    assert!(c > 0.99, "correlation {c}");
}

struct Recovery {
    alpha: f64,
    beta: f64,
}

fn fit_garch(seed: u64) -> Recovery {
    let p = ModelParams::garch(2e-6, 0.08, 0.9, N).unwrap();
    let (r, _) = simulate(&p, 5000, 1e-4, seed).unwrap();
    let cal = calibrate_mle(
        Family::Garch,
        &series(r),
        DistKind::Normal,
        None,
        &CalibrationOptions::default(),
    )
    .unwrap();
    Recovery {
        alpha: cal.params.alpha,
        beta: cal.params.beta,
    }
}

#[test]
fn garch_parameters_recovered() {
    let fits: Vec<Recovery> = (0..20u64).into_par_iter().map(|s| fit_garch(100 + s)).collect();
    let ok = fits
        .iter()
        .filter(|f| {
            (f.alpha - 0.08).abs() <= 0.05 && (f.beta - 0.9).abs() <= 0.05 && (f.alpha + f.beta - 0.98).abs() <= 0.02
        })
        .count();
    assert!(ok >= 18, "{ok}/20 recovered");
}

#[test]
fn arch_parameter_recovered() {
    let p = ModelParams::arch(7e-5, 0.3, N).unwrap();
    let ok = (0..20u64)
        .into_par_iter()
        .filter(|s| {
            let (r, _) = simulate(&p, 5000, 1e-4, 200 + s).unwrap();
            let cal = calibrate_mle(
                Family::Arch,
                &series(r),
                DistKind::Normal,
                None,
                &CalibrationOptions::default(),
            )
            .unwrap();
            (cal.params.alpha - 0.3).abs() <= 0.05
        })
        .count();
    assert!(ok >= 18, "{ok}/20 recovered");
}

#[test]
fn skewness_sign_recovered() {
    let dist = InnovationDistribution::skewed_t(8.0, 0.8).unwrap();
    let p = ModelParams::garch(2e-6, 0.08, 0.9, dist).unwrap();
    let below = (0..20u64)
        .into_par_iter()
        .filter(|s| {
            let (r, _) = simulate(&p, 3000, 1e-4, 300 + s).unwrap();
            let cal = calibrate_mle(
                Family::Garch,
                &series(r),
                DistKind::SkewedT,
                None,
                &CalibrationOptions::default(),
            )
            .unwrap();
            cal.params.dist.shape().unwrap().1 < 1.0
        })
        .count();
    assert!(below >= 18, "gamma < 1 in {below}/20 fits");
}

#[test]
fn calibration_contract() {
    let p = ModelParams::garch(2e-6, 0.08, 0.9, N).unwrap();
    let (r, _) = simulate(&p, 1500, 1e-4, 9).unwrap();
    let s = series(r);
    for family in [Family::Arch, Family::Garch, Family::Egarch] {
        for kind in [DistKind::Normal, DistKind::SkewedT] {
            let cal = calibrate_mle(family, &s, kind, None, &CalibrationOptions::default()).unwrap();
            cal.params.validate().unwrap();
            assert_eq!(cal.params.mu, 0.0);
            assert!(
                cal.log_likelihood >= cal.start_log_likelihood - 1e-9,
                "{family:?} {kind:?}"
            );
            assert!(cal.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{family:?} {kind:?}");
            let again = calibrate_mle(family, &s, kind, None, &CalibrationOptions::default()).unwrap();
            assert_eq!(cal.params, again.params);
            let warm = calibrate_mle(family, &s, kind, Some(&cal.params), &CalibrationOptions::default()).unwrap();
            assert!(warm.log_likelihood >= cal.log_likelihood - 1e-3);
        }
    }
    assert!(calibrate_mle(
        Family::Garch,
        &series(vec![0.01; 100]),
        DistKind::Normal,
        None,
        &CalibrationOptions::default()
    )
    .is_err());
}

#[test]
fn garch_fit_is_scale_equivariant() {
    let p = ModelParams::garch(2e-6, 0.08, 0.9, N).unwrap();
    let (r, _) = simulate(&p, 2000, 1e-4, 10).unwrap();
    let k = 7.5;
    let scaled: Vec<f64> = r.iter().map(|v| v * k).collect();
    for family in [Family::Arch, Family::Garch] {
        let a = calibrate_mle(
            family,
            &series(r.clone()),
            DistKind::Normal,
            None,
            &CalibrationOptions::default(),
        )
        .unwrap();
        let b = calibrate_mle(
            family,
            &series(scaled.clone()),
            DistKind::Normal,
            None,
            &CalibrationOptions::default(),
        )
        .unwrap();
        assert!((b.params.omega / (k * k * a.params.omega) - 1.0).abs() < 1e-3);
        assert!((b.params.alpha - a.params.alpha).abs() < 1e-3 * a.params.alpha.max(1e-3));
        assert!((b.params.beta - a.params.beta).abs() < 1e-3 * a.params.beta.max(1e-3));
        let pa = filter_variances(&a.params, &series(r.clone())).unwrap();
        let pb = filter_variances(&b.params, &series(scaled.clone())).unwrap();
        for (x, y) in pa.sigma2.iter().zip(&pb.sigma2) {
            assert!((y / (k * k * x) - 1.0).abs() < 1e-3);
        }
    }
}

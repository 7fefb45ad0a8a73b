mod common;

use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, StudentsT};
use tailrisk_core::data::{overlapping_sums, ReturnSeries};
use tailrisk_core::distributions::InnovationDistribution;
use tailrisk_core::risk::{
    bn_augmented_window, delta_normal_var_es, empirical_var_es, location_scale_var_es, make_forecast_record,
    ForecastConfig, VarEs,
};

/// Lower order statistic estimator written directly from the definition.
fn hs_oracle(window: &[f64], alpha: f64) -> (f64, f64) {
    let mut s = window.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (alpha * s.len() as f64 + 1e-9).floor() as usize;
    let var = -s[k - 1];
    let es = -s[..k].iter().sum::<f64>() / k as f64;
    (var, es)
}

#[test]
fn hand_countable_window() {
    let mut w = vec![-0.10, -0.08];
    w.extend((0..78).map(|i| i as f64 * 1e-3));
    let r = empirical_var_es(&w, 0.025).unwrap();
    assert!((r.es - 0.09).abs() < 1e-15);
    assert!((r.var - 0.08).abs() < 1e-15);
    let c = empirical_var_es(&[-0.03; 80], 0.025).unwrap();
    assert_eq!((c.var, c.es), (0.03, 0.03));
    assert!(empirical_var_es(&[0.0; 39], 0.025).is_err());
}

#[test]
fn empirical_matches_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in [40usize, 80, 1255, 3001] {
        for alpha in [0.01f64, 0.025, 0.1, 0.3] {
            if (m as f64) < (1.0 / alpha).ceil() {
                continue;
            }
            let w: Vec<f64> = (0..m).map(|_| rng.random_range(-0.2..0.2)).collect();
            let r = empirical_var_es(&w, alpha).unwrap();
            let (var, es) = hs_oracle(&w, alpha);
            assert_eq!(r.var, var);
            assert!((r.es - es).abs() < 1e-15);
        }
    }
}

#[test]
fn empirical_converges_to_normal_tail() {
    let (true_var, true_es) = (1.959_964, 2.337_803);
    for (m, tol) in [(1_000usize, 0.35), (10_000, 0.12), (100_000, 0.04)] {
        let mut es = Vec::new();
        let mut var = Vec::new();
        for seed in 0..20 {
            let z = InnovationDistribution::Normal.sample(m, 1000 + seed);
            let r = empirical_var_es(&z, 0.025).unwrap();
            es.push(r.es);
            var.push(r.var);
        }
        let es_med = common::median(&mut es);
        let var_med = common::median(&mut var);
        assert!((es_med - true_es).abs() < tol, "m={m} es={es_med}");
        assert!((var_med - true_var).abs() < tol, "m={m} var={var_med}");
    }
    // Single 1,255-point window.
    let z = InnovationDistribution::Normal.sample(1255, 77);
    assert!((empirical_var_es(&z, 0.025).unwrap().es - true_es).abs() < 0.15 * 2.0);
}

#[test]
fn delta_normal_matches_closed_form() {
    let z = InnovationDistribution::Normal.sample(5000, 8);
    let (m, sd) = (common::mean(&z), common::variance(&z).sqrt());
    let r = delta_normal_var_es(&z, 0.025).unwrap();
    let zq = -1.959_963_984_540_054;
    assert!((r.var + (m + sd * zq)).abs() < 1e-9);
    assert!((r.es + (m - sd * common::phi(zq) / 0.025)).abs() < 1e-9);
    // Rescale to sample moments (0, 1).
    let std: Vec<f64> = z.iter().map(|v| (v - m) / sd).collect();
    let r = delta_normal_var_es(&std, 0.025).unwrap();
    assert!((r.var - 1.959_964).abs() / 1.959_964 < 1e-3);
    assert!((r.es - 2.337_803).abs() / 2.337_803 < 1e-3);
}

#[test]
fn parametric_normal_values() {
    let r = location_scale_var_es(0.0, 0.05, &InnovationDistribution::Normal, 0.025).unwrap();
    assert!((r.var - 0.097_998).abs() < 1e-6);
    assert!((r.es - 0.116_890).abs() < 1e-6);
    let r = location_scale_var_es(0.0, 0.0, &InnovationDistribution::Normal, 0.025).unwrap();
    assert_eq!((r.var, r.es), (0.0, 0.0));
}

#[test]
fn symmetric_skewed_t_matches_student_t_tail() {
    // ES of a unit-variance t by quadrature of the plain t density.
    let nu = 6.0;
    let d = InnovationDistribution::skewed_t(nu, 1.0).unwrap();
    let t = StudentsT::new(0.0, 1.0, nu).unwrap();
    let c = ((nu - 2.0) / nu).sqrt();
    let r = location_scale_var_es(0.0, 0.05, &d, 0.025).unwrap();
    let q = -r.var / 0.05 / c;
    let mass = 0.5 - common::integrate(&|w| t.pdf(w), q, 0.0, 1e-14);
    assert!((mass - 0.025).abs() < 1e-9);
    let tail = common::integrate_real_line(&|w| if w <= q { w * t.pdf(w) } else { 0.0 }, &[q], 1e-14);
    let es = -0.05 * c * tail / 0.025;
    assert!((r.es - es).abs() < 1e-8, "{} vs {es}", r.es);
}

fn dates_from(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    (0..n).map(|i| start + Days::new(i as u64)).collect()
}

#[test]
fn bn_window_matches_concatenate_then_roll() {
    let cfg = ForecastConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let hist: Vec<f64> = (0..1263).map(|_| rng.random_range(-0.03..0.03)).collect();
        let f = rng.random_range(-0.05..0.05);
        let d0 = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
        let series = ReturnSeries::new(dates_from(d0, 1263), hist.clone(), 1).unwrap();
        let t = d0 + Days::new(1263);
        let w = bn_augmented_window(&series, f, t, &cfg).unwrap();
        let mut combined = hist.clone();
        combined.push(f);
        let mut oracle = Vec::new();
        for end in 10..=combined.len() {
            oracle.push(combined[end - 10..end].iter().sum::<f64>());
        }
        assert_eq!(w.len(), 1255);
        for (a, b) in w.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(*w.dates.last().unwrap(), t);
    }
    let short = ReturnSeries::undated(vec![0.0; 1000]).unwrap();
    assert!(bn_augmented_window(&short, 0.0, NaiveDate::MAX, &cfg).is_err());
}

#[test]
fn bn_window_with_realized_return_is_next_day_hs() {
    let cfg = ForecastConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let daily: Vec<f64> = (0..1400).map(|_| rng.random_range(-0.03..0.03)).collect();
    let d0 = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
    let full = ReturnSeries::new(dates_from(d0, 1400), daily.clone(), 1).unwrap();
    for t in [1263usize, 1300, 1399] {
        let hist = full.slice(t - 1263, t);
        let w = bn_augmented_window(&hist, daily[t], full.dates[t], &cfg).unwrap();
        let bn = empirical_var_es(&w.values, 0.025).unwrap();
        let next_day = overlapping_sums(&daily[t + 1 - 1264..=t], 10);
        let hs = empirical_var_es(&next_day, 0.025).unwrap();
        assert_eq!(bn, hs);
    }
    // A large negative forecast lowers the combined minimum.
    let hist = full.slice(0, 1263);
    let calm = bn_augmented_window(&hist, 0.0, full.dates[1263], &cfg).unwrap();
    let shocked = bn_augmented_window(&hist, -0.10, full.dates[1263], &cfg).unwrap();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min(&shocked.values) < min(&calm.values));
}

#[test]
fn breach_flags_use_strict_inequality() {
    let cfg = ForecastConfig::default();
    let d = NaiveDate::from_ymd_opt(2008, 9, 29).unwrap();
    let f = VarEs { var: 0.04, es: 0.05 };
    assert!(make_forecast_record(d, "hs", f, -0.06, &cfg).unwrap().es_breach);
    let r = make_forecast_record(d, "hs", f, -0.05, &cfg).unwrap();
    assert!(!r.es_breach && r.var_breach);
    assert!(!make_forecast_record(d, "hs", f, 0.10, &cfg).unwrap().es_breach);
    let scaled = make_forecast_record(
        d,
        "hs",
        f,
        -0.06,
        &ForecastConfig {
            portfolio_value: 1e6,
            ..cfg
        },
    )
    .unwrap();
    assert!((scaled.es_forecast - 5e4).abs() < 1e-9 && scaled.es_breach);
}

proptest! {
    #[test]
    fn es_dominates_var_and_both_fall_with_alpha(
        window in proptest::collection::vec(-0.2f64..0.2, 200..400),
        a1 in 0.005f64..0.2,
        bump in 0.0f64..0.2,
    ) {
        let a2 = (a1 + bump).min(0.49);
        let r1 = empirical_var_es(&window, a1).unwrap();
        let r2 = empirical_var_es(&window, a2).unwrap();
        prop_assert!(r1.es >= r1.var);
        prop_assert!(r1.var >= r2.var && r1.es >= r2.es - 1e-15);
        let d1 = delta_normal_var_es(&window, a1).unwrap();
        let d2 = delta_normal_var_es(&window, a2).unwrap();
        prop_assert!(d1.es >= d1.var);
        prop_assert!(d1.var >= d2.var - 1e-12 && d1.es >= d2.es - 1e-12);
    }

    #[test]
    fn parametric_es_dominates(scale in 0.0f64..0.2, nu in 2.5f64..40.0, gamma in 0.3f64..3.0, alpha in 0.001f64..0.3) {
        let d = InnovationDistribution::skewed_t(nu, gamma).unwrap();
        let r = location_scale_var_es(0.0, scale, &d, alpha).unwrap();
        prop_assert!(r.es >= r.var);
    }
}

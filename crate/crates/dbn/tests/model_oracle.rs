mod common;

use tailrisk_dbn::{fit_linear_gaussian, forecast_one_day, score_aic, select_structure, Algorithm, DbnStructure};

fn structure(p: usize, arcs: &[(usize, usize)]) -> DbnStructure {
    DbnStructure::new(
        common::names(p),
        arcs.iter().copied().collect(),
        Algorithm::PcStable,
        0.05,
    )
    .unwrap()
}

/// AIC from raw-unit regressions, one per node.
fn aic_oracle(cols: &[Vec<f64>], s: &DbnStructure) -> f64 {
    let p = cols.len();
    (0..2 * p)
        .map(|v| {
            let y = common::node_column(cols, v);
            let pa = s.parents(v);
            let xc: Vec<Vec<f64>> = pa.iter().map(|&u| common::node_column(cols, u)).collect();
            let xr: Vec<&[f64]> = xc.iter().map(|c| c.as_slice()).collect();
            let (_, rss) = common::ols(&y, &xr);
            let n = y.len() as f64;
            n * (2.0 * std::f64::consts::PI * rss / n).ln() + n + 2.0 * (pa.len() as f64 + 2.0)
        })
        .sum()
}

#[test]
fn aic_matches_regression_oracle() {
    let cols = common::chain(2000, 1, 1);
    let d = common::sliced(&cols);
    for arcs in [
        vec![],
        common::chain_arcs(4),
        vec![(0, 4), (1, 4), (2, 4), (6, 4), (5, 6), (7, 6)],
    ] {
        let s = structure(4, &arcs);
        let (a, b) = (score_aic(&d, &s), aic_oracle(&cols, &s));
        assert!((a - b).abs() < 1e-7 * b.abs(), "{a} vs {b}");
    }
}

#[test]
fn true_parents_lower_and_spurious_parents_raise_aic() {
    let mut raised = 0;
    for seed in 0..20 {
        let d = common::sliced(&common::chain(3000, 1, 40 + seed));
        let arcs = common::chain_arcs(4);
        let truth = structure(4, &arcs);
        let missing = structure(4, &arcs[1..]);
        assert!(score_aic(&d, &truth) < score_aic(&d, &missing));
        let mut extra = arcs.clone();
        extra.push((3, 4));
        raised += usize::from(score_aic(&d, &structure(4, &extra)) > score_aic(&d, &truth));
    }
    // An irrelevant parent lowers AIC only when its chi-square(1) gain beats 2.
    assert!(raised >= 14, "{raised}/20");
}

#[test]
fn selection_is_the_aic_argmin() {
    let d = common::sliced(&common::chain(2000, 0, 3));
    let candidates: Vec<DbnStructure> = [
        vec![],
        vec![(0, 3)],
        common::CHAIN_ARCS.to_vec(),
        vec![(0, 3), (0, 4), (1, 4), (4, 5), (2, 5)],
    ]
    .iter()
    .map(|a| structure(3, a))
    .collect();
    let (best, aic) = select_structure(&d, &candidates).unwrap();
    let min = candidates
        .iter()
        .map(|s| score_aic(&d, s))
        .fold(f64::INFINITY, f64::min);
    assert_eq!(aic, min);
    assert_eq!(score_aic(&d, &best), min);
}

#[test]
fn fitted_coefficients_recover_generator() {
    let cols = common::chain(100_000, 0, 7);
    let d = common::sliced(&cols);
    let m = fit_linear_gaussian(&d, &structure(3, &common::CHAIN_ARCS)).unwrap();
    assert!((m.nodes[3].coefs[0] - 0.5).abs() < 0.01);
    assert!((m.nodes[4].coefs[0] - 0.6).abs() < 0.01);
    assert!((m.nodes[4].coefs[1] - 0.4).abs() < 0.01);
    assert!((m.nodes[5].coefs[0] - 0.7).abs() < 0.01);
    for v in 3..6 {
        assert!((m.nodes[v].resid_var - 1.0).abs() < 0.02);
        assert!(m.nodes[v].intercept.abs() < 0.02);
    }
    // Against the raw regression oracle.
    let y = common::node_column(&cols, 4);
    let x0 = common::node_column(&cols, 0);
    let y0 = common::node_column(&cols, 1);
    let (b, rss) = common::ols(&y, &[&x0, &y0]);
    assert!((m.nodes[4].intercept - b[0]).abs() < 1e-9);
    assert!((m.nodes[4].coefs[0] - b[1]).abs() < 1e-9);
    assert!((m.nodes[4].coefs[1] - b[2]).abs() < 1e-9);
    assert!((m.nodes[4].resid_var - rss / (y.len() as f64 - 3.0)).abs() < 1e-9);
}

#[test]
fn parentless_nodes_keep_sample_moments() {
    let cols = common::chain(500, 0, 9);
    let d = common::sliced(&cols);
    let m = fit_linear_gaussian(&d, &structure(3, &[])).unwrap();
    for v in 0..6 {
        let c = common::node_column(&cols, v);
        let n = c.len() as f64;
        let mean = c.iter().sum::<f64>() / n;
        let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((m.nodes[v].intercept - mean).abs() < 1e-12);
        assert!((m.nodes[v].resid_var - var).abs() < 1e-10);
    }
}

#[test]
fn forecast_propagates_through_slice_one() {
    let cols = common::chain(5000, 0, 11);
    let d = common::sliced(&cols);
    let m = fit_linear_gaussian(&d, &structure(3, &common::CHAIN_ARCS)).unwrap();
    let (x0, y0) = (0.8, -1.3);
    let ny = &m.nodes[4];
    let nz = &m.nodes[5];
    let y1 = ny.intercept + ny.coefs[0] * x0 + ny.coefs[1] * y0;
    let z1 = nz.intercept + nz.coefs[0] * y1;
    let f = forecast_one_day(&m, &[Some(x0), Some(y0), None], 2).unwrap();
    assert!((f - z1).abs() < 1e-12);
    assert!(forecast_one_day(&m, &[Some(x0), None, Some(0.0)], 2).is_err());
    let nx = &m.nodes[3];
    let fx = forecast_one_day(&m, &[Some(x0), None, None], 0).unwrap();
    assert!((fx - (nx.intercept + nx.coefs[0] * x0)).abs() < 1e-12);
}

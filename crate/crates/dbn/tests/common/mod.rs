#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tailrisk_dbn::SlicedDataset;

pub fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("v{i}")).collect()
}

/// X_t = 0.5 X_{t-1} + e, Y_t = 0.6 X_{t-1} + 0.4 Y_{t-1} + e,
/// Z_t = 0.7 Y_t + e, plus `extra` independent white-noise columns.
pub fn chain(n: usize, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut cols = vec![vec![0.0; n]; 3 + extra];
    cols[0][0] = e();
    cols[1][0] = e();
    cols[2][0] = 0.7 * cols[1][0] + e();
    for t in 1..n {
        cols[0][t] = 0.5 * cols[0][t - 1] + e();
        cols[1][t] = 0.6 * cols[0][t - 1] + 0.4 * cols[1][t - 1] + e();
        cols[2][t] = 0.7 * cols[1][t] + e();
    }
    for c in cols.iter_mut().skip(3) {
        for v in c.iter_mut() {
            *v = e();
        }
    }
    cols
}

pub fn white_noise(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

pub fn sliced(cols: &[Vec<f64>]) -> SlicedDataset {
    SlicedDataset::new(names(cols.len()), cols).unwrap()
}

/// Chain nodes without extra columns: X0=0, Y0=1, Z0=2, X1=3, Y1=4, Z1=5.
pub const CHAIN_SKELETON: [(usize, usize); 4] = [(0, 3), (0, 4), (1, 4), (4, 5)];
pub const CHAIN_ARCS: [(usize, usize); 4] = [(0, 3), (0, 4), (1, 4), (4, 5)];

/// True chain arcs when the panel has `p` variables in total.
pub fn chain_arcs(p: usize) -> Vec<(usize, usize)> {
    vec![(0, p), (0, p + 1), (1, p + 1), (p + 1, p + 2)]
}

/// Ordinary least squares with intercept via the normal equations, solved by
/// Gaussian elimination with partial pivoting. Returns (coefficients with
/// intercept first, residual sum of squares).
pub fn ols(y: &[f64], xs: &[&[f64]]) -> (Vec<f64>, f64) {
    let k = xs.len() + 1;
    let n = y.len();
    let row = |t: usize| -> Vec<f64> { std::iter::once(1.0).chain(xs.iter().map(|x| x[t])).collect() };
    let mut a = vec![vec![0.0; k + 1]; k];
    for t in 0..n {
        let r = row(t);
        for i in 0..k {
            for j in 0..k {
                a[i][j] += r[i] * r[j];
            }
            a[i][k] += r[i] * y[t];
        }
    }
    for c in 0..k {
        let piv = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
    let rss = (0..n)
        .map(|t| {
            let fit: f64 = row(t).iter().zip(&beta).map(|(x, b)| x * b).sum();
            (y[t] - fit).powi(2)
        })
        .sum();
    (beta, rss)
}

/// Raw column of a node: slice 0 drops the last row, slice 1 the first.
pub fn node_column(cols: &[Vec<f64>], node: usize) -> Vec<f64> {
    let p = cols.len();
    let c = &cols[node % p];
    if node < p {
        c[..c.len() - 1].to_vec()
    } else {
        c[1..].to_vec()
    }
}

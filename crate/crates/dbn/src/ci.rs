//! Gaussian conditional-independence test on partial correlations.

use nalgebra::DMatrix;
use statrs::function::erf::erfc;

use crate::dataset::SlicedDataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiResult {
    pub partial_corr: f64,
    /// Fisher z statistic `sqrt(n - |Z| - 3) atanh(r)`.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Partial correlation of nodes `x` and `y` given `z`, from the inverse of the
/// correlation submatrix (equivalent to correlating regression residuals).
/// `None` when the conditioning submatrix is singular.
pub fn partial_correlation(corr: &DMatrix<f64>, x: usize, y: usize, z: &[usize]) -> Option<f64> {
    if z.is_empty() {
        return Some(corr[(x, y)]);
    }
    let idx: Vec<usize> = [x, y].iter().chain(z).copied().collect();
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |i, j| corr[(idx[i], idx[j])]);
    let chol = sub.cholesky()?;
    let prec = chol.inverse();
    let (pxx, pyy, pxy) = (prec[(0, 0)], prec[(1, 1)], prec[(0, 1)]);
    if !(pxx > 0.0 && pyy > 0.0) || !pxy.is_finite() {
        return None;
    }
    // Near-singular submatrices show up as huge precision entries.
    if pxx.max(pyy) > 1e10 {
        return None;
    }
    Some(-pxy / (pxx * pyy).sqrt())
}

/// Fisher z test of `x _||_ y | z`. `None` when the test cannot be run
/// (singular conditioning set or too few rows).
pub fn ci_test_fisher_z(data: &SlicedDataset, x: usize, y: usize, z: &[usize]) -> Option<CiResult> {
    let dof = data.n_rows() as f64 - z.len() as f64 - 3.0;
    if dof <= 0.0 {
        return None;
    }
    let r = partial_correlation(data.corr(), x, y, z)?.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    let statistic = dof.sqrt() * r.atanh();
    Some(CiResult {
        partial_corr: r,
        statistic,
        p_value: erfc(statistic.abs() / std::f64::consts::SQRT_2),
    })
}

//! Gaussian AIC of a two-slice structure and the model-selection rule.

use nalgebra::DMatrix;

use crate::dataset::SlicedDataset;
use crate::error::{DbnError, Result};
use crate::structure::DbnStructure;

/// Local AIC contribution of `node` regressed on `parents` with an intercept:
/// `n ln(2 pi s2) + n + 2 (|parents| + 2)` with `s2 = RSS / n` in raw units.
/// Infinite when the parent correlation matrix is singular.
pub fn local_aic(data: &SlicedDataset, node: usize, parents: &[usize]) -> f64 {
    let n = data.n_rows() as f64;
    let corr = data.corr();
    let explained = if parents.is_empty() {
        0.0
    } else {
        let k = parents.len();
        let rpp = DMatrix::from_fn(k, k, |i, j| corr[(parents[i], parents[j])]);
        let r = nalgebra::DVector::from_fn(k, |i, _| corr[(parents[i], node)]);
        match rpp.cholesky() {
            Some(ch) => r.dot(&ch.solve(&r)),
            None => return f64::INFINITY,
        }
    };
    let rss_std = (n - 1.0) * (1.0 - explained);
    let s2 = rss_std / n * data.scale(node).powi(2);
    if !(s2 > 0.0) {
        return f64::INFINITY;
    }
    n * (2.0 * std::f64::consts::PI * s2).ln() + n + 2.0 * (parents.len() as f64 + 2.0)
}

/// AIC of a structure over all `2p` nodes (lower is better).
pub fn score_aic(data: &SlicedDataset, structure: &DbnStructure) -> f64 {
    (0..data.n_nodes())
        .map(|v| local_aic(data, v, &structure.parents(v)))
        .sum()
}

/// Picks the structure with the lowest AIC, breaking ties by fewer arcs,
/// then algorithm order, then smaller `ci_alpha`. Returns the winner and its
/// score.
pub fn select_structure(data: &SlicedDataset, candidates: &[DbnStructure]) -> Result<(DbnStructure, f64)> {
    let mut scored: Vec<(f64, &DbnStructure)> = candidates.iter().map(|s| (score_aic(data, s), s)).collect();
    scored.retain(|(a, _)| a.is_finite());
    scored.sort_by(|(a, s), (b, t)| {
        a.total_cmp(b)
            .then(s.n_arcs().cmp(&t.n_arcs()))
            .then(s.algorithm.cmp(&t.algorithm))
            .then(s.ci_alpha.total_cmp(&t.ci_alpha))
    });
    let (aic, best) = scored
        .first()
        .ok_or_else(|| DbnError::InvalidArgument("no candidate structure has a finite AIC".into()))?;
    let mut best = (*best).clone();
    let dropped = candidates.len() - scored.len();
    if dropped > 0 {
        best.diagnostics
            .push(format!("{dropped} candidate(s) with singular regressions skipped"));
    }
    Ok((best, *aic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Algorithm;
    use std::collections::BTreeSet;

    fn ar_data() -> SlicedDataset {
        let mut x = vec![0.0f64; 400];
        let mut s = 1u64;
        for t in 1..400 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let e = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            x[t] = 0.8 * x[t - 1] + e;
        }
        SlicedDataset::new(vec!["x".into()], &[x]).unwrap()
    }

    #[test]
    fn true_parent_lowers_aic() {
        let d = ar_data();
        let empty = DbnStructure::new(vec!["x".into()], BTreeSet::new(), Algorithm::Mmhc, 0.05).unwrap();
        let ar = DbnStructure::new(vec!["x".into()], [(0, 1)].into(), Algorithm::PcStable, 0.05).unwrap();
        assert!(score_aic(&d, &ar) < score_aic(&d, &empty));
        let (best, _) = select_structure(&d, &[empty, ar.clone()]).unwrap();
        assert_eq!(best.arcs, ar.arcs);
    }

    #[test]
    fn ties_prefer_fewer_arcs_then_algorithm() {
        let d = ar_data();
        let a = DbnStructure::new(vec!["x".into()], [(0, 1)].into(), Algorithm::SiHitonPc, 0.05).unwrap();
        let b = DbnStructure {
            algorithm: Algorithm::PcStable,
            ..a.clone()
        };
        let (best, _) = select_structure(&d, &[a, b]).unwrap();
        assert_eq!(best.algorithm, Algorithm::PcStable);
        assert!(select_structure(&d, &[]).is_err());
    }
}

//! Consecutive-day slice pairs, standardized per node.

use std::ops::Range;

use nalgebra::DMatrix;
use tailrisk_core::data::AlignedPanel;

use crate::error::{DbnError, Result};

/// Minimum number of panel rows in a training window.
pub const MIN_ROWS: usize = 200;

/// Paired slices `(x_{t-1}, x_t)` over a training window. Each node column
/// (variable x slice) is standardized to mean 0 and variance 1 (n - 1
/// divisor) with its own parameters.
#[derive(Debug, Clone)]
pub struct SlicedDataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    center: Vec<f64>,
    scale: Vec<f64>,
    corr: DMatrix<f64>,
}

impl SlicedDataset {
    /// Builds slice pairs from raw, gap-free variable columns of equal length.
    pub fn new(names: Vec<String>, raw: &[Vec<f64>]) -> Result<Self> {
        if names.len() != raw.len() || names.is_empty() {
            return Err(DbnError::InvalidArgument(format!(
                "{} names for {} columns",
                names.len(),
                raw.len()
            )));
        }
        let len = raw[0].len();
        if raw.iter().any(|c| c.len() != len) {
            return Err(DbnError::InvalidArgument("columns differ in length".into()));
        }
        if len < MIN_ROWS {
            return Err(DbnError::InsufficientRows {
                needed: MIN_ROWS,
                have: len,
            });
        }
        for (name, col) in names.iter().zip(raw) {
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DbnError::MissingValue {
                    column: name.clone(),
                    row,
                });
            }
        }
        let p = names.len();
        let mut columns = Vec::with_capacity(2 * p);
        let mut center = Vec::with_capacity(2 * p);
        let mut scale = Vec::with_capacity(2 * p);
        for slice in 0..2 {
            for (name, col) in names.iter().zip(raw) {
                let part = if slice == 0 { &col[..len - 1] } else { &col[1..] };
                let n = part.len() as f64;
                let mean = part.iter().sum::<f64>() / n;
                let var = part.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                let sd = var.sqrt();
                if !(sd > 1e-12 * mean.abs().max(1e-300)) {
                    return Err(DbnError::ZeroVariance(name.clone()));
                }
                columns.push(part.iter().map(|v| (v - mean) / sd).collect::<Vec<f64>>());
                center.push(mean);
                scale.push(sd);
            }
        }
        let n = len - 1;
        let k = 2 * p;
        let mut corr = DMatrix::<f64>::identity(k, k);
        for a in 0..k {
            for b in (a + 1)..k {
                let c = columns[a].iter().zip(&columns[b]).map(|(x, y)| x * y).sum::<f64>() / (n as f64 - 1.0);
                corr[(a, b)] = c;
                corr[(b, a)] = c;
            }
        }
        Ok(Self {
            names,
            columns,
            center,
            scale,
            corr,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn n_nodes(&self) -> usize {
        2 * self.names.len()
    }

    /// Number of slice pairs.
    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn node(&self, var: usize, slice: usize) -> usize {
        slice * self.n_vars() + var
    }

    pub fn var_of(&self, node: usize) -> usize {
        node % self.n_vars()
    }

    pub fn node_name(&self, node: usize) -> String {
        node_name(&self.names, node)
    }

    /// Standardized column of a node.
    pub fn column(&self, node: usize) -> &[f64] {
        &self.columns[node]
    }

    pub fn center(&self, node: usize) -> f64 {
        self.center[node]
    }

    pub fn scale(&self, node: usize) -> f64 {
        self.scale[node]
    }

    pub fn destandardize(&self, node: usize, z: f64) -> f64 {
        self.center[node] + self.scale[node] * z
    }

    pub fn standardize(&self, node: usize, raw: f64) -> f64 {
        (raw - self.center[node]) / self.scale[node]
    }

    /// Correlation matrix of all node columns.
    pub fn corr(&self) -> &DMatrix<f64> {
        &self.corr
    }
}

/// Slice-tagged node label: `name[t-1]` for slice 0, `name[t]` for slice 1.
pub fn node_name(names: &[String], node: usize) -> String {
    let p = names.len();
    if node < p {
        format!("{}[t-1]", names[node])
    } else {
        format!("{}[t]", names[node - p])
    }
}

/// Slice pairs over panel rows `rows`, using `columns` (all panel columns when
/// `None`). Any gap inside the window is an error.
pub fn make_sliced(panel: &AlignedPanel, rows: Range<usize>, columns: Option<&[String]>) -> Result<SlicedDataset> {
    if rows.end > panel.len() || rows.start >= rows.end {
        return Err(DbnError::InvalidArgument(format!(
            "row range {rows:?} outside panel of {} rows",
            panel.len()
        )));
    }
    let chosen: Vec<&tailrisk_core::data::Column> = match columns {
        None => panel.columns.iter().collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                panel
                    .column(n)
                    .ok_or_else(|| DbnError::InvalidArgument(format!("unknown column `{n}`")))
            })
            .collect::<Result<_>>()?,
    };
    let mut raw = Vec::with_capacity(chosen.len());
    for c in &chosen {
        let mut col = Vec::with_capacity(rows.len());
        for (row, v) in c.values[rows.clone()].iter().enumerate() {
            col.push(v.ok_or_else(|| DbnError::MissingValue {
                column: c.name.clone(),
                row: rows.start + row,
            })?);
        }
        raw.push(col);
    }
    SlicedDataset::new(chosen.iter().map(|c| c.name.clone()).collect(), &raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..n).map(f).collect()
    }

    #[test]
    fn pairs_and_standardization() {
        let a = ramp(1264, |i| (i as f64 * 0.37).sin() * 3.0 + 10.0);
        let b = ramp(1264, |i| (i as f64 * 0.11).cos() + i as f64 * 1e-3);
        let d = SlicedDataset::new(vec!["a".into(), "b".into()], &[a.clone(), b]).unwrap();
        assert_eq!(d.n_rows(), 1263);
        for node in 0..4 {
            let c = d.column(node);
            let n = c.len() as f64;
            let m = c.iter().sum::<f64>() / n;
            let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9);
        }
        for t in 0..1263 {
            assert!((d.destandardize(0, d.column(0)[t]) - a[t]).abs() < 1e-9);
            assert!((d.destandardize(2, d.column(2)[t]) - a[t + 1]).abs() < 1e-9);
        }
        assert_eq!(d.node_name(1), "b[t-1]");
        assert_eq!(d.node_name(3), "b[t]");
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let a = ramp(300, |i| i as f64);
        let flat = vec![5.0; 300];
        assert_eq!(
            SlicedDataset::new(vec!["a".into(), "flat".into()], &[a.clone(), flat]).unwrap_err(),
            DbnError::ZeroVariance("flat".into())
        );
        assert!(matches!(
            SlicedDataset::new(vec!["a".into()], &[a[..100].to_vec()]),
            Err(DbnError::InsufficientRows { .. })
        ));
        let mut gap = a.clone();
        gap[7] = f64::NAN;
        assert!(matches!(
            SlicedDataset::new(vec!["a".into()], &[gap]),
            Err(DbnError::MissingValue { row: 7, .. })
        ));
    }
}

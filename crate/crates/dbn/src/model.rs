//! Linear-Gaussian conditional distributions and one-day-ahead forecasts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::SlicedDataset;
use crate::error::{DbnError, Result};
use crate::structure::DbnStructure;

/// Ridge added to a singular parent correlation matrix.
const RIDGE: f64 = 1e-8;

/// `node = intercept + sum coef_i parent_i + N(0, resid_var)` in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeModel {
    pub node: usize,
    pub parents: Vec<usize>,
    pub intercept: f64,
    pub coefs: Vec<f64>,
    pub resid_var: f64,
    /// Set when the normal equations needed the ridge fallback.
    pub ridged: bool,
}

#[derive(Debug, Clone)]
pub struct DbnModel {
    pub structure: DbnStructure,
    pub nodes: Vec<NodeModel>,
}

/// Least-squares fit of every node on its parents (with intercept).
pub fn fit_linear_gaussian(data: &SlicedDataset, structure: &DbnStructure) -> Result<DbnModel> {
    if structure.names.as_slice() != data.names() {
        return Err(DbnError::InvalidStructure("structure and data variables differ".into()));
    }
    structure.validate()?;
    let n = data.n_rows() as f64;
    let corr = data.corr();
    let mut nodes = Vec::with_capacity(data.n_nodes());
    for v in 0..data.n_nodes() {
        let parents = structure.parents(v);
        let k = parents.len();
        let (sd_y, mu_y) = (data.scale(v), data.center(v));
        if k == 0 {
            nodes.push(NodeModel {
                node: v,
                parents,
                intercept: mu_y,
                coefs: vec![],
                resid_var: sd_y * sd_y,
                ridged: false,
            });
            continue;
        }
        let rpp = DMatrix::from_fn(k, k, |i, j| corr[(parents[i], parents[j])]);
        let r = DVector::from_fn(k, |i, _| corr[(parents[i], v)]);
        let (beta, ridged) = match rpp.clone().cholesky() {
            Some(ch) => (ch.solve(&r), false),
            None => {
                let reg = rpp + DMatrix::identity(k, k) * RIDGE;
                let ch = reg.cholesky().ok_or_else(|| {
                    DbnError::InvalidStructure(format!("parents of {} are collinear", data.node_name(v)))
                })?;
                (ch.solve(&r), true)
            }
        };
        let coefs: Vec<f64> = parents
            .iter()
            .zip(beta.iter())
            .map(|(&x, b)| b * sd_y / data.scale(x))
            .collect();
        let intercept = mu_y
            - parents
                .iter()
                .zip(&coefs)
                .map(|(&x, c)| c * data.center(x))
                .sum::<f64>();
        let rss_std = ((n - 1.0) * (1.0 - r.dot(&beta))).max(0.0);
        let dof = (n - k as f64 - 1.0).max(1.0);
        let resid_var = (rss_std / dof * sd_y * sd_y).max(f64::MIN_POSITIVE);
        nodes.push(NodeModel {
            node: v,
            parents,
            intercept,
            coefs,
            resid_var,
            ridged,
        });
    }
    Ok(DbnModel {
        structure: structure.clone(),
        nodes,
    })
}

impl DbnModel {
    pub fn n_vars(&self) -> usize {
        self.structure.n_vars()
    }

    pub fn ridged_nodes(&self) -> usize {
        self.nodes.iter().filter(|m| m.ridged).count()
    }
}

/// Conditional mean of variable `target` at slice 1 given raw slice-0
/// values, propagating means through slice-1 ancestors in topological order.
/// Evidence is only required for slice-0 ancestors of the target.
pub fn forecast_one_day(model: &DbnModel, evidence: &[Option<f64>], target: usize) -> Result<f64> {
    let p = model.n_vars();
    if evidence.len() != p || target >= p {
        return Err(DbnError::InvalidArgument(format!(
            "{} evidence values and target {target} for {p} variables",
            evidence.len()
        )));
    }
    let goal = p + target;
    let mut needed = vec![false; 2 * p];
    let mut stack = vec![goal];
    while let Some(v) = stack.pop() {
        if !needed[v] {
            needed[v] = true;
            stack.extend(model.nodes[v].parents.iter().copied());
        }
    }
    let mut value = vec![f64::NAN; 2 * p];
    for v in model.structure.topological_order() {
        if !needed[v] {
            continue;
        }
        value[v] = if v < p {
            evidence[v].ok_or_else(|| DbnError::MissingEvidence(model.structure.names[v].clone()))?
        } else {
            let m = &model.nodes[v];
            m.intercept + m.parents.iter().zip(&m.coefs).map(|(&x, c)| c * value[x]).sum::<f64>()
        };
    }
    Ok(value[goal])
}

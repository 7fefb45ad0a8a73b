//! Structure learning: PC-Stable, MMHC and SI-HITON-PC on Fisher z tests.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ci::ci_test_fisher_z;
use crate::dataset::SlicedDataset;
use crate::error::{DbnError, Result};
use crate::score::local_aic;
use crate::structure::{legal_arc, legal_pair, orient_skeleton, topological_order, Algorithm, DbnStructure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnSettings {
    /// Significance level of the independence tests.
    pub ci_alpha: f64,
    /// Largest conditioning set considered.
    pub max_cond: usize,
}

impl Default for LearnSettings {
    fn default() -> Self {
        Self {
            ci_alpha: 0.05,
            max_cond: 3,
        }
    }
}

impl LearnSettings {
    fn validate(&self) -> Result<()> {
        if !(self.ci_alpha > 0.0 && self.ci_alpha < 1.0) {
            return Err(DbnError::InvalidArgument(format!(
                "ci_alpha {} outside (0, 1)",
                self.ci_alpha
            )));
        }
        Ok(())
    }
}

pub fn learn(algorithm: Algorithm, data: &SlicedDataset, settings: &LearnSettings) -> Result<DbnStructure> {
    match algorithm {
        Algorithm::PcStable => learn_pc_stable(data, settings),
        Algorithm::Mmhc => learn_mmhc(data, settings),
        Algorithm::SiHitonPc => learn_si_hiton_pc(data, settings),
    }
}

type Sepsets = BTreeMap<(usize, usize), Vec<usize>>;

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Tester that counts tests which could not be run. An untestable pair is
/// treated as dependent.
struct Tester<'a> {
    data: &'a SlicedDataset,
    alpha: f64,
    skipped: std::cell::Cell<usize>,
}

impl<'a> Tester<'a> {
    fn new(data: &'a SlicedDataset, alpha: f64) -> Self {
        Self {
            data,
            alpha,
            skipped: std::cell::Cell::new(0),
        }
    }

    fn p_value(&self, x: usize, y: usize, z: &[usize]) -> Option<f64> {
        let r = ci_test_fisher_z(self.data, x, y, z);
        if r.is_none() {
            self.skipped.set(self.skipped.get() + 1);
        }
        r.map(|r| r.p_value)
    }

    fn independent(&self, x: usize, y: usize, z: &[usize]) -> bool {
        self.p_value(x, y, z).is_some_and(|p| p > self.alpha)
    }

    /// First subset (by size, then lexicographic) of `pool` of size at most
    /// `max` that separates `x` and `y`.
    fn find_sepset(&self, x: usize, y: usize, pool: &[usize], max: usize) -> Option<Vec<usize>> {
        (0..=max.min(pool.len())).find_map(|l| first_combination(pool, l, |s| self.independent(x, y, s)))
    }

    fn diagnostics(&self) -> Vec<String> {
        match self.skipped.get() {
            0 => vec![],
            n => vec![format!(
                "{n} independence test(s) skipped as singular; treated as dependent"
            )],
        }
    }
}

/// Visits size-`k` subsets of `items` in lexicographic order and returns the
/// first for which `pred` holds.
fn first_combination<F: FnMut(&[usize]) -> bool>(items: &[usize], k: usize, mut pred: F) -> Option<Vec<usize>> {
    let n = items.len();
    if k > n {
        return None;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf = vec![0; k];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = items[i];
        }
        if pred(&buf) {
            return Some(buf);
        }
        let pos = (0..k).rev().find(|&i| idx[i] != i + n - k)?;
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn legal_pairs(p: usize) -> Vec<(usize, usize)> {
    let n = 2 * p;
    (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| legal_pair(p, a, b))
        .collect()
}

fn finish(
    data: &SlicedDataset,
    arcs: BTreeSet<(usize, usize)>,
    algorithm: Algorithm,
    settings: &LearnSettings,
    diagnostics: Vec<String>,
) -> Result<DbnStructure> {
    let mut s = DbnStructure::new(data.names().to_vec(), arcs, algorithm, settings.ci_alpha)?;
    s.diagnostics = diagnostics;
    Ok(s)
}

/// PC-Stable: adjacency sets are frozen at the start of each conditioning
/// level so the skeleton does not depend on the order edges are visited.
pub fn learn_pc_stable(data: &SlicedDataset, settings: &LearnSettings) -> Result<DbnStructure> {
    settings.validate()?;
    let p = data.n_vars();
    let tester = Tester::new(data, settings.ci_alpha);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); 2 * p];
    for (a, b) in legal_pairs(p) {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let mut sepsets = Sepsets::new();
    for level in 0..=settings.max_cond {
        let frozen = adj.clone();
        let edges: Vec<(usize, usize)> = (0..2 * p)
            .flat_map(|a| frozen[a].iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .collect();
        if edges
            .iter()
            .all(|&(x, y)| frozen[x].len().max(frozen[y].len()) <= level)
        {
            break;
        }
        for (x, y) in edges {
            let found = [(x, y), (y, x)].iter().find_map(|&(a, b)| {
                let pool: Vec<usize> = frozen[a].iter().copied().filter(|&v| v != b).collect();
                first_combination(&pool, level, |s| tester.independent(x, y, s))
            });
            if let Some(s) = found {
                adj[x].remove(&y);
                adj[y].remove(&x);
                sepsets.insert((x, y), s);
            }
        }
    }
    let skeleton: BTreeSet<(usize, usize)> = (0..2 * p)
        .flat_map(|a| adj[a].iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
        .collect();
    let arcs = orient_skeleton(p, &skeleton, |x, y, z| sepsets.get(&key(x, y)).map(|s| s.contains(&z)));
    finish(data, arcs, Algorithm::PcStable, settings, tester.diagnostics())
}

/// Association used by MMPC: `-ln p` of the test, zero once independent.
fn association(tester: &Tester, x: usize, t: usize, z: &[usize]) -> f64 {
    match tester.p_value(x, t, z) {
        Some(p) if p > tester.alpha => 0.0,
        Some(p) => -p.max(1e-300).ln(),
        None => f64::INFINITY,
    }
}

/// Minimum association of `x` with `t` over subsets of `cpc`.
fn min_association(tester: &Tester, x: usize, t: usize, cpc: &[usize], max: usize) -> f64 {
    let mut best = f64::INFINITY;
    for l in 0..=max.min(cpc.len()) {
        first_combination(cpc, l, |s| {
            best = best.min(association(tester, x, t, s));
            best == 0.0
        });
        if best == 0.0 {
            break;
        }
    }
    best
}

/// Removes members of `cpc` separated from `t` by a subset of the others.
fn shrink(tester: &Tester, t: usize, cpc: &mut Vec<usize>, max: usize) {
    let snapshot = cpc.clone();
    for x in snapshot {
        let others: Vec<usize> = cpc.iter().copied().filter(|&v| v != x).collect();
        if tester.find_sepset(x, t, &others, max).is_some() {
            cpc.retain(|&v| v != x);
        }
    }
}

fn mmpc(tester: &Tester, p: usize, t: usize, max: usize) -> Vec<usize> {
    let mut open: Vec<usize> = (0..2 * p).filter(|&v| legal_pair(p, v, t)).collect();
    let mut cpc: Vec<usize> = Vec::new();
    loop {
        let mut best: Option<(f64, usize)> = None;
        let mut dropped = Vec::new();
        for &x in &open {
            let a = min_association(tester, x, t, &cpc, max);
            if a == 0.0 {
                dropped.push(x);
            } else if best.is_none_or(|(b, _)| a > b) {
                best = Some((a, x));
            }
        }
        open.retain(|v| !dropped.contains(v));
        let Some((_, x)) = best else { break };
        open.retain(|&v| v != x);
        cpc.push(x);
    }
    shrink(tester, t, &mut cpc, max);
    cpc.sort_unstable();
    cpc
}

/// Keeps `a - b` only if each appears in the other's candidate set.
fn symmetric_skeleton(cpc: &[Vec<usize>]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (a, set) in cpc.iter().enumerate() {
        for &b in set {
            if a < b && cpc[b].contains(&a) {
                out.insert((a, b));
            }
        }
    }
    out
}

/// MMHC: max-min parents and children restricts the search space, then a
/// greedy hill climb on AIC adds, deletes and reverses arcs within it.
pub fn learn_mmhc(data: &SlicedDataset, settings: &LearnSettings) -> Result<DbnStructure> {
    settings.validate()?;
    let p = data.n_vars();
    let n = 2 * p;
    let tester = Tester::new(data, settings.ci_alpha);
    let cpc: Vec<Vec<usize>> = (0..n).map(|t| mmpc(&tester, p, t, settings.max_cond)).collect();
    let candidates = symmetric_skeleton(&cpc);

    let mut arcs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut cache: BTreeMap<(usize, Vec<usize>), f64> = BTreeMap::new();
    let mut local = |v: usize, pa: &[usize]| -> f64 {
        let mut pa = pa.to_vec();
        pa.sort_unstable();
        *cache.entry((v, pa.clone())).or_insert_with(|| local_aic(data, v, &pa))
    };
    let mut current: Vec<f64> = (0..n).map(|v| local(v, &[])).collect();
    let max_iter = 10 * candidates.len() + 10;
    for _ in 0..max_iter {
        // (gain, new arc set)
        let mut best: Option<(f64, BTreeSet<(usize, usize)>)> = None;
        let mut consider = |gain: f64, next: BTreeSet<(usize, usize)>| {
            if gain > 1e-9 && best.as_ref().is_none_or(|(g, _)| gain > *g) && topological_order(n, &next).is_some() {
                best = Some((gain, next));
            }
        };
        for &(a, b) in &candidates {
            for (from, to) in [(a, b), (b, a)] {
                if arcs.contains(&(from, to)) {
                    // Delete.
                    let pa: Vec<usize> = parents[to].iter().copied().filter(|&v| v != from).collect();
                    let gain = current[to] - local(to, &pa);
                    let mut next = arcs.clone();
                    next.remove(&(from, to));
                    consider(gain, next);
                    // Reverse.
                    if legal_arc(p, to, from) {
                        let mut pa_from = parents[from].clone();
                        pa_from.push(to);
                        let gain = gain + current[from] - local(from, &pa_from);
                        let mut next = arcs.clone();
                        next.remove(&(from, to));
                        next.insert((to, from));
                        consider(gain, next);
                    }
                } else if !arcs.contains(&(to, from)) && legal_arc(p, from, to) {
                    // Add.
                    let mut pa = parents[to].clone();
                    pa.push(from);
                    let gain = current[to] - local(to, &pa);
                    let mut next = arcs.clone();
                    next.insert((from, to));
                    consider(gain, next);
                }
            }
        }
        let Some((_, next)) = best else { break };
        arcs = next;
        for (v, pa) in parents.iter_mut().enumerate() {
            *pa = arcs.iter().filter(|(_, t)| *t == v).map(|(f, _)| *f).collect();
            current[v] = local(v, pa);
        }
    }
    finish(data, arcs, Algorithm::Mmhc, settings, tester.diagnostics())
}

/// SI-HITON-PC: candidates enter in order of marginal association and are
/// admitted only if no subset of the current set separates them from the
/// target; a final pass removes members that became separable.
fn si_hiton(tester: &Tester, p: usize, t: usize, max: usize) -> Vec<usize> {
    let data = tester.data;
    let mut ranked: Vec<(f64, usize)> = (0..2 * p)
        .filter(|&v| legal_pair(p, v, t))
        .filter_map(|v| {
            let r = ci_test_fisher_z(data, v, t, &[])?;
            (r.p_value <= tester.alpha).then_some((r.statistic.abs(), v))
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut cpc: Vec<usize> = Vec::new();
    for (_, x) in ranked {
        if tester.find_sepset(x, t, &cpc, max).is_none() {
            cpc.push(x);
        }
    }
    shrink(tester, t, &mut cpc, max);
    cpc.sort_unstable();
    cpc
}

pub fn learn_si_hiton_pc(data: &SlicedDataset, settings: &LearnSettings) -> Result<DbnStructure> {
    settings.validate()?;
    let p = data.n_vars();
    let n = 2 * p;
    let tester = Tester::new(data, settings.ci_alpha);
    let cpc: Vec<Vec<usize>> = (0..n).map(|t| si_hiton(&tester, p, t, settings.max_cond)).collect();
    let skeleton = symmetric_skeleton(&cpc);
    let neighbors = |v: usize| -> Vec<usize> {
        skeleton
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    };
    let mut sepsets = Sepsets::new();
    for &(x, y) in &legal_pairs(p) {
        if skeleton.contains(&(x, y)) {
            continue;
        }
        let found = [(x, y), (y, x)].iter().find_map(|&(a, b)| {
            let pool: Vec<usize> = neighbors(a).into_iter().filter(|&v| v != b).collect();
            tester.find_sepset(x, y, &pool, settings.max_cond)
        });
        if let Some(s) = found {
            sepsets.insert((x, y), s);
        }
    }
    let arcs = orient_skeleton(p, &skeleton, |x, y, z| sepsets.get(&key(x, y)).map(|s| s.contains(&z)));
    finish(data, arcs, Algorithm::SiHitonPc, settings, tester.diagnostics())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_lexicographic() {
        let mut seen = Vec::new();
        first_combination(&[1, 4, 7, 9], 2, |s| {
            seen.push(s.to_vec());
            false
        });
        assert_eq!(
            seen,
            vec![vec![1, 4], vec![1, 7], vec![1, 9], vec![4, 7], vec![4, 9], vec![7, 9]]
        );
        let mut empty = 0;
        first_combination(&[1, 2], 0, |s| {
            empty += s.len() + 1;
            false
        });
        assert_eq!(empty, 1);
        assert!(first_combination(&[1], 2, |_| true).is_none());
    }

    #[test]
    fn legal_pairs_exclude_slice_zero() {
        let pairs = legal_pairs(2);
        assert_eq!(pairs, vec![(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(LearnSettings {
            ci_alpha: 1.5,
            max_cond: 3
        }
        .validate()
        .is_err());
    }
}

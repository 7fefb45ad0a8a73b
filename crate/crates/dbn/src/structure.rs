//! Two-slice DAGs, their legality rules and the arc-list text format.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::node_name;
use crate::error::{DbnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    PcStable,
    Mmhc,
    SiHitonPc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::PcStable, Algorithm::Mmhc, Algorithm::SiHitonPc];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::PcStable => "pc_stable",
            Algorithm::Mmhc => "mmhc",
            Algorithm::SiHitonPc => "si_hiton_pc",
        }
    }
}

/// Whether `from -> to` is allowed: no self-loops and nothing into slice 0.
pub fn legal_arc(n_vars: usize, from: usize, to: usize) -> bool {
    from != to && to >= n_vars && from < 2 * n_vars && to < 2 * n_vars
}

/// Whether an (undirected) edge between `a` and `b` can exist at all.
pub fn legal_pair(n_vars: usize, a: usize, b: usize) -> bool {
    a != b && (a >= n_vars || b >= n_vars)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbnStructure {
    /// Variable names; node labels are derived from them.
    pub names: Vec<String>,
    /// Directed arcs `(from, to)`.
    pub arcs: BTreeSet<(usize, usize)>,
    pub algorithm: Algorithm,
    pub ci_alpha: f64,
    pub diagnostics: Vec<String>,
}

impl DbnStructure {
    pub fn new(
        names: Vec<String>,
        arcs: BTreeSet<(usize, usize)>,
        algorithm: Algorithm,
        ci_alpha: f64,
    ) -> Result<Self> {
        let s = Self {
            names,
            arcs,
            algorithm,
            ci_alpha,
            diagnostics: Vec::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn n_nodes(&self) -> usize {
        2 * self.names.len()
    }

    pub fn n_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn parents(&self, node: usize) -> Vec<usize> {
        self.arcs.iter().filter(|(_, t)| *t == node).map(|(f, _)| *f).collect()
    }

    /// Undirected edges as `(min, max)` pairs.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.arcs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect()
    }

    /// Checks arc legality and acyclicity.
    pub fn validate(&self) -> Result<()> {
        let p = self.n_vars();
        if let Some(&(a, b)) = self.arcs.iter().find(|&&(a, b)| !legal_arc(p, a, b)) {
            return Err(DbnError::InvalidStructure(format!(
                "illegal arc {} -> {}",
                node_name(&self.names, a),
                node_name(&self.names, b)
            )));
        }
        if topological_order(self.n_nodes(), &self.arcs).is_none() {
            return Err(DbnError::InvalidStructure("slice-1 subgraph has a cycle".into()));
        }
        Ok(())
    }

    /// Nodes in an order where parents precede children.
    pub fn topological_order(&self) -> Vec<usize> {
        topological_order(self.n_nodes(), &self.arcs).expect("validated structures are acyclic")
    }

    /// One `from -> to` line per arc, slice-tagged names.
    pub fn to_arc_list(&self) -> String {
        self.arcs
            .iter()
            .map(|&(a, b)| format!("{} -> {}\n", node_name(&self.names, a), node_name(&self.names, b)))
            .collect()
    }

    /// Parses the arc-list format against known variable names.
    pub fn from_arc_list(text: &str, names: Vec<String>, algorithm: Algorithm, ci_alpha: f64) -> Result<Self> {
        let labels: BTreeMap<String, usize> = (0..2 * names.len()).map(|i| (node_name(&names, i), i)).collect();
        let mut arcs = BTreeSet::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (a, b) = line
                .split_once("->")
                .ok_or_else(|| DbnError::InvalidArgument(format!("bad arc line `{line}`")))?;
            let lookup = |s: &str| {
                labels
                    .get(s.trim())
                    .copied()
                    .ok_or_else(|| DbnError::InvalidArgument(format!("unknown node `{}`", s.trim())))
            };
            arcs.insert((lookup(a)?, lookup(b)?));
        }
        Self::new(names, arcs, algorithm, ci_alpha)
    }
}

/// Kahn's algorithm; `None` if the arcs contain a cycle.
pub fn topological_order(n: usize, arcs: &BTreeSet<(usize, usize)>) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for &(a, b) in arcs {
        indeg[b] += 1;
        children[a].push(b);
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Partially directed graph used while orienting a learned skeleton.
#[derive(Debug, Clone)]
pub(crate) struct Pdag {
    n_vars: usize,
    undirected: BTreeSet<(usize, usize)>,
    directed: BTreeSet<(usize, usize)>,
}

impl Pdag {
    fn adjacent(&self, a: usize, b: usize) -> bool {
        let k = (a.min(b), a.max(b));
        self.undirected.contains(&k) || self.directed.contains(&(a, b)) || self.directed.contains(&(b, a))
    }

    fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected.contains(&(a.min(b), a.max(b)))
    }

    /// Directed path `from ~> to` over directed arcs.
    fn has_path(&self, from: usize, to: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if seen.insert(v) {
                stack.extend(self.directed.iter().filter(|(a, _)| *a == v).map(|(_, b)| *b));
            }
        }
        false
    }

    /// Orients the undirected edge `a - b` as `a -> b` if legal and acyclic.
    fn orient(&mut self, a: usize, b: usize) -> bool {
        if !self.is_undirected(a, b) || !legal_arc(self.n_vars, a, b) || self.has_path(b, a) {
            return false;
        }
        self.undirected.remove(&(a.min(b), a.max(b)));
        self.directed.insert((a, b));
        true
    }

    fn neighbors(&self, v: usize, n_nodes: usize) -> Vec<usize> {
        (0..n_nodes).filter(|&u| u != v && self.adjacent(u, v)).collect()
    }

    fn meek_pass(&mut self, n_nodes: usize) -> bool {
        let mut changed = false;
        let edges: Vec<(usize, usize)> = self.undirected.iter().copied().collect();
        for (x, y) in edges {
            for (b, c) in [(x, y), (y, x)] {
                if !self.is_undirected(b, c) {
                    continue;
                }
                // R1: a -> b - c, a and c not adjacent.
                let r1 = (0..n_nodes).any(|a| self.directed.contains(&(a, b)) && a != c && !self.adjacent(a, c));
                // R2: b -> k -> c.
                let r2 = (0..n_nodes).any(|k| self.directed.contains(&(b, k)) && self.directed.contains(&(k, c)));
                // R3: b - k1 -> c, b - k2 -> c, k1 and k2 not adjacent.
                let ks: Vec<usize> = (0..n_nodes)
                    .filter(|&k| self.is_undirected(b, k) && self.directed.contains(&(k, c)))
                    .collect();
                let r3 = ks
                    .iter()
                    .enumerate()
                    .any(|(i, &k1)| ks[i + 1..].iter().any(|&k2| !self.adjacent(k1, k2)));
                if (r1 || r2 || r3) && self.orient(b, c) {
                    changed = true;
                }
            }
        }
        changed
    }
}

/// Orients a legal skeleton: temporal arcs first, then v-structures at
/// slice-1 colliders, Meek rules, and finally any remaining edges low index
/// to high (reversed when that would close a cycle), re-applying the rules
/// after each.
///
/// `separates(x, y, z)` reports whether `z` lies in a separating set of the
/// non-adjacent pair `(x, y)`; `None` means no separating set is known and
/// the triple is left unoriented.
pub(crate) fn orient_skeleton<F>(
    n_vars: usize,
    skeleton: &BTreeSet<(usize, usize)>,
    separates: F,
) -> BTreeSet<(usize, usize)>
where
    F: Fn(usize, usize, usize) -> Option<bool>,
{
    let n_nodes = 2 * n_vars;
    let mut g = Pdag {
        n_vars,
        undirected: BTreeSet::new(),
        directed: BTreeSet::new(),
    };
    for &(a, b) in skeleton {
        if a < n_vars {
            g.directed.insert((a, b));
        } else {
            g.undirected.insert((a, b));
        }
    }
    for z in n_vars..n_nodes {
        let nb = g.neighbors(z, n_nodes);
        for (i, &x) in nb.iter().enumerate() {
            for &y in &nb[i + 1..] {
                if g.adjacent(x, y) || (x < n_vars && y < n_vars) {
                    continue;
                }
                if separates(x, y, z) == Some(false) {
                    for w in [x, y] {
                        g.orient(w, z);
                    }
                }
            }
        }
    }
    while g.meek_pass(n_nodes) {}
    // Orient one leftover edge at a time and re-propagate so the extension
    // adds no new colliders where the rules can prevent it.
    while let Some(&(a, b)) = g.undirected.iter().next() {
        if !g.orient(a, b) && !g.orient(b, a) {
            // Unreachable while the directed part stays acyclic.
            g.undirected.remove(&(a, b));
        }
        while g.meek_pass(n_nodes) {}
    }
    debug_assert!(g.undirected.is_empty());
    g.directed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn legality() {
        assert!(legal_arc(3, 0, 3));
        assert!(legal_arc(3, 4, 5));
        assert!(!legal_arc(3, 3, 0));
        assert!(!legal_arc(3, 0, 1));
        assert!(!legal_arc(3, 4, 4));
        assert!(!legal_pair(3, 0, 1));
        assert!(legal_pair(3, 1, 4));
    }

    #[test]
    fn rejects_cycles_and_back_arcs() {
        let cyc: BTreeSet<_> = [(3, 4), (4, 5), (5, 3)].into();
        assert!(DbnStructure::new(names(3), cyc, Algorithm::PcStable, 0.05).is_err());
        let back: BTreeSet<_> = [(3, 0)].into();
        assert!(DbnStructure::new(names(3), back, Algorithm::PcStable, 0.05).is_err());
    }

    #[test]
    fn arc_list_round_trip() {
        let arcs: BTreeSet<_> = [(0, 3), (1, 4), (4, 5)].into();
        let s = DbnStructure::new(names(3), arcs, Algorithm::Mmhc, 0.01).unwrap();
        let text = s.to_arc_list();
        assert_eq!(text, "v0[t-1] -> v0[t]\nv1[t-1] -> v1[t]\nv1[t] -> v2[t]\n");
        let back = DbnStructure::from_arc_list(&text, names(3), Algorithm::Mmhc, 0.01).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn orientation_finds_collider() {
        // x1 - z1 - y1 with x1, y1 separated by the empty set.
        let skel: BTreeSet<_> = [(3, 5), (4, 5)].into();
        let arcs = orient_skeleton(3, &skel, |_, _, _| Some(false));
        assert_eq!(arcs, [(3, 5), (4, 5)].into());
        // Same triple, z in the separating set: no collider, a chain instead.
        let arcs = orient_skeleton(3, &skel, |_, _, _| Some(true));
        assert_eq!(arcs.len(), 2);
        assert!(!(arcs.contains(&(3, 5)) && arcs.contains(&(4, 5))));
    }

    #[test]
    fn temporal_arcs_propagate() {
        // x0 -> y1 - z1, x0 and z1 non-adjacent: Meek R1 gives y1 -> z1.
        let skel: BTreeSet<_> = [(0, 4), (4, 5)].into();
        let arcs = orient_skeleton(3, &skel, |_, _, _| None);
        assert_eq!(arcs, [(0, 4), (4, 5)].into());
    }
}

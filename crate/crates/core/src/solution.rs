//! Balanced k-partitions and their evaluation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::model::edge_index;

/// Penalty per weight-infeasible class and per intra-class forbidden pair.
pub const BIG_M: f64 = 10000.0;

/// Tolerance for weight window and balance comparisons.
pub const WEIGHT_TOL: f64 = 1e-9;

/// A partition of `0..n` into `k` classes whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assign: Vec<usize>,
    classes: Vec<Vec<usize>>,
    class_weight: Vec<f64>,
    fl: usize,
    rplus: Vec<usize>,
    rminus: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Total intra-class distance.
    pub d: f64,
    /// Classes whose weight is outside `[wl, wu]`.
    pub infeasible_classes: Vec<usize>,
    /// Intra-class forbidden pairs.
    pub forbidden_hits: usize,
    /// `d + M * (|infeasible| + forbidden_hits)`
    pub f: f64,
}

impl Evaluation {
    /// True when no class violates the window and no forbidden pair is joined.
    pub fn is_feasible(&self) -> bool {
        self.infeasible_classes.is_empty() && self.forbidden_hits == 0
    }
}

impl Partition {
    /// Builds a partition from a class label per node. Fails unless every
    /// label is below `k`, every class is nonempty and sizes are balanced.
    pub fn from_assignment(weights: &[f64], k: usize, assign: Vec<usize>) -> Result<Partition> {
        let n = assign.len();
        if weights.len() != n {
            return Err(Error::InvalidPartition(format!(
                "{} labels for {} nodes",
                n,
                weights.len()
            )));
        }
        if k == 0 || n < k {
            return Err(Error::InvalidPartition(format!("cannot split {n} nodes into {k} classes")));
        }
        let mut classes = vec![Vec::new(); k];
        let mut class_weight = vec![0.0; k];
        for (v, &c) in assign.iter().enumerate() {
            if c >= k {
                return Err(Error::InvalidPartition(format!("node {v} has class {c} >= k = {k}")));
            }
            classes[c].push(v);
            class_weight[c] += weights[v];
        }
        let fl = n / k;
        let fu = n.div_ceil(k);
        let mut rplus = Vec::new();
        let mut rminus = Vec::new();
        for (c, members) in classes.iter().enumerate() {
            match members.len() {
                s if s == fl => rminus.push(c),
                s if s == fu => rplus.push(c),
                s => {
                    return Err(Error::InvalidPartition(format!(
                        "class {c} has {s} nodes, allowed sizes are {fl} and {fu}"
                    )))
                }
            }
        }
        if fl == fu {
            // Equi-partition: every class is in R-.
            rplus.clear();
            rminus = (0..k).collect();
        }
        Ok(Partition { assign, classes, class_weight, fl, rplus, rminus })
    }

    pub fn from_classes(weights: &[f64], classes: &[Vec<usize>]) -> Result<Partition> {
        let n = weights.len();
        let mut assign = vec![usize::MAX; n];
        for (c, members) in classes.iter().enumerate() {
            for &v in members {
                if v >= n {
                    return Err(Error::InvalidPartition(format!("node {v} out of range")));
                }
                if assign[v] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("node {v} listed twice")));
                }
                assign[v] = c;
            }
        }
        if let Some(v) = assign.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidPartition(format!("node {v} not assigned")));
        }
        Partition::from_assignment(weights, classes.len(), assign)
    }

    /// Round-robin start: node `v` goes to class `v mod k`.
    pub fn initial(inst: &Instance) -> Partition {
        let assign = (0..inst.n()).map(|v| v % inst.k()).collect();
        Partition::from_assignment(inst.weights(), inst.k(), assign).expect("round robin is balanced")
    }

    pub fn n(&self) -> usize {
        self.assign.len()
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, v: usize) -> usize {
        self.assign[v]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assign
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_weight(&self, c: usize) -> f64 {
        self.class_weight[c]
    }

    pub fn class_weights(&self) -> &[f64] {
        &self.class_weight
    }

    /// Classes holding `floor(n/k) + 1` nodes.
    pub fn rplus(&self) -> &[usize] {
        &self.rplus
    }

    /// Classes holding `floor(n/k)` nodes.
    pub fn rminus(&self) -> &[usize] {
        &self.rminus
    }

    pub fn floor_size(&self) -> usize {
        self.fl
    }

    /// Moves `v` from its class (which must be in R+) to class `to` (which
    /// must be in R-); the two classes swap their size flags.
    pub fn apply_move(&mut self, v: usize, to: usize, weights: &[f64]) {
        let from = self.assign[v];
        debug_assert!(self.rplus.contains(&from) && self.rminus.contains(&to));
        let pos = self.classes[from].iter().position(|&u| u == v).unwrap();
        self.classes[from].swap_remove(pos);
        self.classes[to].push(v);
        self.assign[v] = to;
        self.class_weight[from] -= weights[v];
        self.class_weight[to] += weights[v];
        let p = self.rplus.iter().position(|&c| c == from).unwrap();
        self.rplus[p] = to;
        let m = self.rminus.iter().position(|&c| c == to).unwrap();
        self.rminus[m] = from;
        self.rplus.sort_unstable();
        self.rminus.sort_unstable();
    }

    /// Swaps the classes of `v` and `u`.
    pub fn apply_exchange(&mut self, v: usize, u: usize, weights: &[f64]) {
        let (cv, cu) = (self.assign[v], self.assign[u]);
        debug_assert_ne!(cv, cu);
        let pv = self.classes[cv].iter().position(|&x| x == v).unwrap();
        self.classes[cv][pv] = u;
        let pu = self.classes[cu].iter().position(|&x| x == u).unwrap();
        self.classes[cu][pu] = v;
        self.assign[v] = cu;
        self.assign[u] = cv;
        let delta = weights[u] - weights[v];
        self.class_weight[cv] += delta;
        self.class_weight[cu] -= delta;
    }

    /// Relabels classes in order of their smallest member and sorts members.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut classes: Vec<Vec<usize>> = self
            .classes
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_unstable();
                c
            })
            .collect();
        classes.sort_by_key(|c| c[0]);
        classes
    }

    /// Indicator vector over edge variables (pairs in lexicographic order).
    pub fn to_incidence(&self) -> Vec<f64> {
        let n = self.n();
        let mut x = vec![0.0; n * (n - 1) / 2];
        for class in &self.classes {
            for (a, &u) in class.iter().enumerate() {
                for &v in &class[a + 1..] {
                    x[edge_index(n, u, v)] = 1.0;
                }
            }
        }
        x
    }

    /// Drops the trailing nodes `n_keep..n` (dummies) from every class.
    pub fn strip_trailing(&self, n_keep: usize, weights: &[f64]) -> Result<Partition> {
        let classes: Vec<Vec<usize>> = self
            .classes
            .iter()
            .map(|c| c.iter().copied().filter(|&v| v < n_keep).collect())
            .collect();
        Partition::from_classes(&weights[..n_keep], &classes)
    }

    pub fn to_toml(&self, eval: &Evaluation) -> String {
        let file = PartitionFile {
            k: self.k(),
            d: Some(eval.d),
            f: Some(eval.f),
            infeasible_classes: Some(eval.infeasible_classes.clone()),
            class_weights: Some(self.class_weight.clone()),
            classes: self.canonical(),
        };
        toml::to_string(&file).expect("partition serializes")
    }

    /// Reads the class lists of a partition file; the informational keys
    /// (`d`, `f`, weights) are ignored and recomputed by [`evaluate`].
    pub fn from_toml(inst: &Instance, text: &str) -> Result<Partition> {
        let file: PartitionFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.k != file.classes.len() {
            return Err(Error::Parse(format!("k = {} but {} classes", file.k, file.classes.len())));
        }
        if file.k != inst.k() {
            return Err(Error::InvalidPartition(format!(
                "partition has {} classes, instance has k = {}",
                file.k,
                inst.k()
            )));
        }
        Partition::from_classes(inst.weights(), &file.classes)
    }

    pub fn load(inst: &Instance, path: impl AsRef<Path>) -> Result<Partition> {
        Partition::from_toml(inst, &fs::read_to_string(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionFile {
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    infeasible_classes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_weights: Option<Vec<f64>>,
    classes: Vec<Vec<usize>>,
}

pub fn weight_infeasible(inst: &Instance, w: f64) -> bool {
    w < inst.wl() - WEIGHT_TOL || w > inst.wu() + WEIGHT_TOL
}

/// Full evaluation of `p` on `inst`.
pub fn evaluate(inst: &Instance, p: &Partition) -> Result<Evaluation> {
    if p.n() != inst.n() || p.k() != inst.k() {
        return Err(Error::InvalidPartition(format!(
            "partition of {} nodes into {} classes does not match instance (n = {}, k = {})",
            p.n(),
            p.k(),
            inst.n(),
            inst.k()
        )));
    }
    let mut d = 0.0;
    let mut forbidden_hits = 0;
    for class in p.classes() {
        for (a, &u) in class.iter().enumerate() {
            for &v in &class[a + 1..] {
                d += inst.dist(u, v);
                if inst.is_forbidden(u, v) {
                    forbidden_hits += 1;
                }
            }
        }
    }
    let infeasible_classes: Vec<usize> = (0..p.k()).filter(|&c| weight_infeasible(inst, p.class_weight(c))).collect();
    let f = d + BIG_M * (infeasible_classes.len() + forbidden_hits) as f64;
    Ok(Evaluation { d, infeasible_classes, forbidden_hits, f })
}

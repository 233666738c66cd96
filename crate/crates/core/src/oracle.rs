//! Exhaustive enumeration of balanced partitions for small instances.
//!
//! Nodes are placed in index order; each node either joins one of the
//! classes opened so far or opens the next one. Every balanced partition is
//! therefore produced exactly once, with classes labelled by their smallest
//! member.

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::solution::{evaluate, Evaluation, Partition, WEIGHT_TOL};

/// Largest `n` accepted by default.
pub const DEFAULT_CAP: usize = 13;

#[derive(Debug, Clone)]
pub struct EnumerationResult {
    /// Least intra-class distance over feasible partitions.
    pub optimum: Option<f64>,
    /// All feasible partitions attaining the optimum (canonical labels).
    pub optimal: Vec<Partition>,
    pub feasible_count: u64,
    /// Balanced partitions visited before weight/forbidden filtering.
    pub enumerated_count: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub cap: usize,
    /// Relative tolerance for ties at the optimum.
    pub tie_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { cap: DEFAULT_CAP, tie_tol: 1e-12 }
    }
}

struct Walker<'a, F: FnMut(&Partition, &Evaluation)> {
    inst: &'a Instance,
    k: usize,
    fl: usize,
    fu: usize,
    r: usize,
    assign: Vec<usize>,
    sizes: Vec<usize>,
    weights: Vec<f64>,
    big: usize,
    visitor: F,
    result: EnumerationResult,
    tie_tol: f64,
}

impl<F: FnMut(&Partition, &Evaluation)> Walker<'_, F> {
    fn rec(&mut self, v: usize, open: usize) {
        let n = self.inst.n();
        if v == n {
            if open == self.k && self.big == self.r {
                self.leaf();
            }
            return;
        }
        // Not enough nodes left to fill the remaining classes to size fl.
        let deficit: usize = (0..open).map(|c| self.fl.saturating_sub(self.sizes[c])).sum::<usize>() + (self.k - open) * self.fl;
        if deficit > n - v {
            return;
        }
        for c in 0..open {
            if self.sizes[c] < self.fu && (self.sizes[c] < self.fl || self.big < self.r) {
                if (0..n).any(|u| u < v && self.assign[u] == c && self.inst.is_forbidden(u, v)) {
                    continue;
                }
                self.place(v, c);
                self.rec(v + 1, open);
                self.unplace(v, c);
            }
        }
        if open < self.k {
            self.place(v, open);
            self.rec(v + 1, open + 1);
            self.unplace(v, open);
        }
    }

    fn place(&mut self, v: usize, c: usize) {
        self.assign[v] = c;
        self.sizes[c] += 1;
        self.weights[c] += self.inst.weight(v);
        if self.sizes[c] == self.fl + 1 && self.fu > self.fl {
            self.big += 1;
        }
    }

    fn unplace(&mut self, v: usize, c: usize) {
        if self.sizes[c] == self.fl + 1 && self.fu > self.fl {
            self.big -= 1;
        }
        self.sizes[c] -= 1;
        self.weights[c] -= self.inst.weight(v);
        self.assign[v] = usize::MAX;
    }

    fn leaf(&mut self) {
        self.result.enumerated_count += 1;
        let (wl, wu) = (self.inst.wl(), self.inst.wu());
        if self.weights.iter().any(|&w| w < wl - WEIGHT_TOL || w > wu + WEIGHT_TOL) {
            return;
        }
        let p = Partition::from_assignment(self.inst.weights(), self.k, self.assign.clone()).expect("balanced by construction");
        let eval = evaluate(self.inst, &p).expect("sizes match");
        if !eval.is_feasible() {
            return;
        }
        self.result.feasible_count += 1;
        (self.visitor)(&p, &eval);
        let tol = self.tie_tol * eval.d.abs().max(1.0);
        match self.result.optimum {
            Some(best) if eval.d > best + tol => {}
            Some(best) if eval.d >= best - tol => self.result.optimal.push(p),
            _ => {
                self.result.optimum = Some(eval.d);
                self.result.optimal = vec![p];
            }
        }
    }
}

/// Visits every balanced, weight-feasible partition without forbidden pairs.
pub fn enumerate_with<F>(inst: &Instance, opts: OracleOptions, visitor: F) -> Result<EnumerationResult>
where
    F: FnMut(&Partition, &Evaluation),
{
    let n = inst.n();
    if n > opts.cap {
        return Err(Error::CapExceeded { n, cap: opts.cap });
    }
    let sb = inst.size_bounds();
    let k = inst.k();
    let mut w = Walker {
        inst,
        k,
        fl: sb.fl,
        fu: sb.fu,
        r: sb.r,
        assign: vec![usize::MAX; n],
        sizes: vec![0; k],
        weights: vec![0.0; k],
        big: 0,
        visitor,
        result: EnumerationResult { optimum: None, optimal: Vec::new(), feasible_count: 0, enumerated_count: 0 },
        tie_tol: opts.tie_tol,
    };
    w.rec(0, 0);
    Ok(w.result)
}

pub fn enumerate<F>(inst: &Instance, visitor: F) -> Result<EnumerationResult>
where
    F: FnMut(&Partition, &Evaluation),
{
    enumerate_with(inst, OracleOptions::default(), visitor)
}

/// Optimal value and one optimal partition, or `None` if no feasible
/// partition exists.
pub fn optimum(inst: &Instance) -> Result<Option<(f64, Partition)>> {
    let res = enumerate(inst, |_, _| {})?;
    Ok(res.optimum.map(|d| (d, res.optimal[0].clone())))
}

/// Closed-form number of balanced partitions of `n` nodes into `k` classes.
pub fn balanced_partition_count(n: usize, k: usize) -> u128 {
    let fl = n / k;
    let fu = n.div_ceil(k);
    let r = n % k;
    let fact = |m: usize| (1..=m as u128).product::<u128>();
    let fu_fact = fact(fu);
    let fl_fact = fact(fl);
    let mut denom: u128 = fact(r) * fact(k - r);
    for _ in 0..r {
        denom *= fu_fact;
    }
    for _ in 0..(k - r) {
        denom *= fl_fact;
    }
    fact(n) / denom
}

//! Two-stage tabu search over balanced partitions.
//!
//! The search minimizes `f = d + M * (|I| + forbidden pairs joined)`.
//! Every iteration scans the whole neighbourhood (1-moves first, then
//! 2-exchanges, both in index order) and applies the admissible neighbour of
//! least `f`, the first one on ties. A neighbour is admissible when it is not
//! tabu or when it improves on the best `f` found so far.
//!
//! Features are `(node, class)` pairs: after moving `v` out of class `i`,
//! `v` may not re-enter `i` for `t` iterations. A 2-exchange records one
//! feature per moved node, sharing a single tenure draw. The tenure is
//! drawn uniformly from `5..=40` while the current solution is infeasible
//! (`f >= M`) and from `5..=20` otherwise, exactly one draw per applied
//! move, from a [`SplitMix64`] seeded with the run seed.
//!
//! Candidate values are computed incrementally from per-node class sums
//! `D[v][c]`, updated in `O(n)` after each move.

use serde::Serialize;

use crate::instance::Instance;
use crate::rng::SplitMix64;
use crate::solution::{evaluate, weight_infeasible, Evaluation, Partition, BIG_M};

/// Iteration budget `floor(exp(0.26571 n - 0.052978))`.
pub fn iteration_limit(n: usize) -> u64 {
    (0.26571 * n as f64 - 0.052978).exp().floor() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Move {
    /// Node `v` goes to class `to`.
    Shift { v: usize, to: usize },
    /// Nodes `v` and `u` trade classes.
    Exchange { v: usize, u: usize },
}

/// Candidate 1-moves: nodes of `R+` classes into `R-` classes.
pub fn neighbors_1move(p: &Partition) -> impl Iterator<Item = Move> + '_ {
    p.rplus().iter().flat_map(move |&i| {
        p.classes()[i]
            .iter()
            .flat_map(move |&v| p.rminus().iter().map(move |&j| Move::Shift { v, to: j }))
    })
}

/// Candidate 2-exchanges: every pair of nodes in different classes, `v < u`.
pub fn neighbors_2exchange(p: &Partition) -> impl Iterator<Item = Move> + '_ {
    let n = p.n();
    (0..n).flat_map(move |v| {
        ((v + 1)..n)
            .filter(move |&u| p.class_of(u) != p.class_of(v))
            .map(move |u| Move::Exchange { v, u })
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub iteration: u64,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct TabuResult {
    pub best: Partition,
    pub eval: Evaluation,
    /// Iteration and value of each improvement of the best solution;
    /// iteration 0 is the initial partition.
    pub trace: Vec<TraceEntry>,
    pub iterations: u64,
}

impl TabuResult {
    pub fn last_improvement(&self) -> u64 {
        self.trace.last().map_or(0, |t| t.iteration)
    }
}

/// Incremental search state.
pub struct TabuState<'a> {
    inst: &'a Instance,
    /// Effective pair cost: distance, plus `M` for forbidden pairs.
    cost: Vec<f64>,
    n: usize,
    k: usize,
    pub current: Partition,
    /// `sums[v * k + c]`: cost from `v` to the members of `c` other than `v`.
    sums: Vec<f64>,
    d: f64,
    bad: usize,
    /// `expiry[v * k + c]`: last iteration at which `v` may not enter `c`.
    expiry: Vec<u64>,
}

impl<'a> TabuState<'a> {
    pub fn new(inst: &'a Instance, start: Partition) -> TabuState<'a> {
        let n = inst.n();
        let k = inst.k();
        let mut cost = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    cost[i * n + j] = inst.dist(i, j) + if inst.is_forbidden(i, j) { BIG_M } else { 0.0 };
                }
            }
        }
        let mut sums = vec![0.0; n * k];
        for v in 0..n {
            for u in 0..n {
                if u != v {
                    sums[v * k + start.class_of(u)] += cost[v * n + u];
                }
            }
        }
        let d = (0..n).map(|v| sums[v * k + start.class_of(v)]).sum::<f64>() / 2.0;
        let bad = (0..k).filter(|&c| weight_infeasible(inst, start.class_weight(c))).count();
        TabuState { inst, cost, n, k, current: start, sums, d, bad, expiry: vec![0; n * k] }
    }

    /// Current objective including penalties.
    pub fn f(&self) -> f64 {
        self.d + BIG_M * self.bad as f64
    }

    fn class_bad(&self, w: f64) -> usize {
        usize::from(weight_infeasible(self.inst, w))
    }

    /// Objective after applying `mv`, without applying it.
    pub fn value_after(&self, mv: Move) -> f64 {
        let (k, p, w) = (self.k, &self.current, self.inst.weights());
        match mv {
            Move::Shift { v, to } => {
                let from = p.class_of(v);
                let dd = self.sums[v * k + to] - self.sums[v * k + from];
                let (wf, wt) = (p.class_weight(from), p.class_weight(to));
                let db = self.class_bad(wf - w[v]) + self.class_bad(wt + w[v]);
                let old = self.class_bad(wf) + self.class_bad(wt);
                self.d + dd + BIG_M * (self.bad + db - old) as f64
            }
            Move::Exchange { v, u } => {
                let (cv, cu) = (p.class_of(v), p.class_of(u));
                let e = self.cost[v * self.n + u];
                let dd = self.sums[v * k + cu] - self.sums[v * k + cv] + self.sums[u * k + cv] - self.sums[u * k + cu] - 2.0 * e;
                let delta = w[u] - w[v];
                let (wv, wu) = (p.class_weight(cv), p.class_weight(cu));
                let db = self.class_bad(wv + delta) + self.class_bad(wu - delta);
                let old = self.class_bad(wv) + self.class_bad(wu);
                self.d + dd + BIG_M * (self.bad + db - old) as f64
            }
        }
    }

    pub fn is_tabu(&self, mv: Move, iter: u64) -> bool {
        let k = self.k;
        let p = &self.current;
        match mv {
            Move::Shift { v, to } => self.expiry[v * k + to] >= iter,
            Move::Exchange { v, u } => {
                self.expiry[v * k + p.class_of(u)] >= iter || self.expiry[u * k + p.class_of(v)] >= iter
            }
        }
    }

    fn relocate(&mut self, v: usize, from: usize, to: usize) {
        let (n, k) = (self.n, self.k);
        for x in 0..n {
            if x != v {
                let c = self.cost[x * n + v];
                self.sums[x * k + from] -= c;
                self.sums[x * k + to] += c;
            }
        }
    }

    /// Applies `mv`; features expire after iteration `expire_at`.
    pub fn apply(&mut self, mv: Move, expire_at: u64) {
        let new_f = self.value_after(mv);
        let k = self.k;
        let w = self.inst.weights();
        match mv {
            Move::Shift { v, to } => {
                let from = self.current.class_of(v);
                self.relocate(v, from, to);
                self.current.apply_move(v, to, w);
                self.expiry[v * k + from] = expire_at;
            }
            Move::Exchange { v, u } => {
                let (cv, cu) = (self.current.class_of(v), self.current.class_of(u));
                self.relocate(v, cv, cu);
                self.relocate(u, cu, cv);
                self.current.apply_exchange(v, u, w);
                self.expiry[v * k + cv] = expire_at;
                self.expiry[u * k + cu] = expire_at;
            }
        }
        self.bad = (0..k).filter(|&c| weight_infeasible(self.inst, self.current.class_weight(c))).count();
        self.d = new_f - BIG_M * self.bad as f64;
    }
}

/// Runs `it_limit` iterations from the round-robin partition.
pub fn run(inst: &Instance, seed: u64, it_limit: u64) -> TabuResult {
    run_from(inst, Partition::initial(inst), seed, it_limit)
}

pub fn run_from(inst: &Instance, start: Partition, seed: u64, it_limit: u64) -> TabuResult {
    let mut rng = SplitMix64::new(seed);
    let mut state = TabuState::new(inst, start);
    let mut best = state.current.clone();
    let mut best_f = state.f();
    let mut trace = vec![TraceEntry { iteration: 0, f: best_f }];

    for iter in 1..=it_limit {
        let mut chosen: Option<(Move, f64)> = None;
        {
            let mut consider = |mv: Move| {
                let val = state.value_after(mv);
                if chosen.is_some_and(|(_, b)| val >= b) {
                    return;
                }
                if state.is_tabu(mv, iter) && val >= best_f {
                    return;
                }
                chosen = Some((mv, val));
            };
            for mv in neighbors_1move(&state.current) {
                consider(mv);
            }
            for mv in neighbors_2exchange(&state.current) {
                consider(mv);
            }
        }
        let Some((mv, _)) = chosen else { continue };
        let tenure = if state.f() >= BIG_M { rng.range_inclusive(5, 40) } else { rng.range_inclusive(5, 20) };
        state.apply(mv, iter + tenure);
        let f = state.f();
        if f < best_f {
            best_f = f;
            best = state.current.clone();
            trace.push(TraceEntry { iteration: iter, f });
        }
    }
    let eval = evaluate(inst, &best).expect("partition matches instance");
    TabuResult { best, eval, trace, iterations: it_limit }
}

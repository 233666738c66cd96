//! Branch-and-cut over the edge formulations.
//!
//! Each node solves its LP relaxation with the dual simplex, then runs a
//! cut loop:
//!
//! 1. if the LP point is integral, every pool triangle not yet in the LP is
//!    checked and violated ones are added (lazy rows); once none is
//!    violated the point is decoded into a partition, re-evaluated and
//!    offered as incumbent;
//! 2. otherwise triangle rows are separated from the on-demand deciles and,
//!    only when none is found, the enabled custom families run;
//! 3. the loop stops when nothing is violated or after the round cap
//!    (100 at the root, 20 elsewhere), and the node branches on the edge
//!    variable closest to 0.5.
//!
//! Nodes are explored depth-first along the child that agrees with the
//! rounding of the branching value; the sibling goes into a best-bound
//! queue that is consulted whenever a dive ends. Rows added anywhere are
//! globally valid and shared by every node and worker.
//!
//! With more than one thread, workers share the queue, the incumbent and
//! the row list behind a mutex; each owns its LP and engine. Results are
//! deterministic only with a single worker.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::cuts::{self, Cut, CutFamily, EnumLimits, WeightBound};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::model::{edge_index, Formulation, Model, ModelConfig, RowKind, SeparationContext};
use crate::rng::{split_seed, SplitMix64};
use crate::simplex::{Basis, DualSimplex, LpError, LpOptions, LpStatus, Row};
use crate::solution::{evaluate, Evaluation, Partition};
use crate::tabu;

/// Distance from the nearest integer below which a value counts as integral.
pub const INT_TOL: f64 = 1e-6;

/// A solver configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Strategy {
    pub name: String,
    pub formulation: Formulation,
    /// Triangle deciles in the initial relaxation; the others are separated.
    pub initial_deciles: Vec<u8>,
    /// Start from a tabu search incumbent.
    pub warm_start: bool,
    pub two_partition: bool,
    pub weight_cover: bool,
    /// Exhaustive Weight-Lowerbound separation (expensive).
    pub weight_lower: bool,
    /// Exhaustive Weight-Upperbound separation (expensive).
    pub weight_upper: bool,
    pub root_cut_rounds: usize,
    pub tree_cut_rounds: usize,
}

impl Strategy {
    /// Dummy-completed formulation, every triangle in the relaxation.
    pub fn s1() -> Strategy {
        Strategy {
            name: "S1".into(),
            formulation: Formulation::F1,
            initial_deciles: (1..=10).collect(),
            warm_start: false,
            two_partition: false,
            weight_cover: false,
            weight_lower: false,
            weight_upper: false,
            root_cut_rounds: 100,
            tree_cut_rounds: 20,
        }
    }

    /// Original graph with the `beta` equation, every triangle in the relaxation.
    pub fn s2() -> Strategy {
        Strategy { name: "S2".into(), formulation: Formulation::F2, ..Strategy::s1() }
    }

    /// S2 with a tabu warm start.
    pub fn s3() -> Strategy {
        Strategy { name: "S3".into(), warm_start: true, ..Strategy::s2() }
    }

    /// S3 with only the two cheapest triangle deciles up front.
    pub fn s4() -> Strategy {
        Strategy { name: "S4".into(), initial_deciles: vec![1, 2], ..Strategy::s3() }
    }

    /// S4 with 2-partition and Weight-Cover separation.
    pub fn s5() -> Strategy {
        Strategy { name: "S5".into(), two_partition: true, weight_cover: true, ..Strategy::s4() }
    }

    /// `s1`..`s5`, case-insensitive.
    pub fn by_name(name: &str) -> Option<Strategy> {
        match name.to_ascii_lowercase().as_str() {
            "s1" => Some(Strategy::s1()),
            "s2" => Some(Strategy::s2()),
            "s3" => Some(Strategy::s3()),
            "s4" => Some(Strategy::s4()),
            "s5" => Some(Strategy::s5()),
            _ => None,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { initial_deciles: self.initial_deciles.clone(), ..ModelConfig::all_triangles(self.formulation) }
    }

    fn custom_cuts(&self) -> bool {
        self.two_partition || self.weight_cover || self.weight_lower || self.weight_upper
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub seed: u64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub threads: usize,
    /// Stop after this many nodes.
    pub node_limit: Option<u64>,
    /// Print a progress line at this interval (seconds).
    pub progress_interval: Option<f64>,
    /// Overrides the tabu iteration budget of warm starts.
    pub tabu_iterations: Option<u64>,
    /// Limits for exhaustive weight-bound separation.
    pub enum_limits: EnumLimits,
    /// Exhaustive Weight-Upperbound separation stops after this many nodes.
    pub weight_upper_node_limit: Option<u64>,
    pub record_cut_log: bool,
    pub record_nodes: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            seed: 0,
            time_limit: None,
            threads: 1,
            node_limit: None,
            progress_interval: None,
            tabu_iterations: None,
            enum_limits: EnumLimits::default(),
            weight_upper_node_limit: Some(1500),
            record_cut_log: false,
            record_nodes: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
    Infeasible,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutLogEntry {
    pub family: CutFamily,
    pub violation: f64,
    pub support: usize,
    pub node: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeLogEntry {
    pub id: u64,
    pub parent: Option<u64>,
    pub depth: u32,
    /// Bound inherited from the parent.
    pub parent_bound: f64,
    /// Final bound of the node, `None` when its LP was infeasible.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub strategy: String,
    pub status: SolveStatus,
    /// Best partition found, over the original nodes.
    pub incumbent: Option<Partition>,
    pub evaluation: Option<Evaluation>,
    /// Global lower bound (equals the objective when optimal).
    pub best_bound: Option<f64>,
    pub root_bound: Option<f64>,
    pub nodes: u64,
    /// Rows added by family, lazy triangle rows included.
    pub cuts: BTreeMap<CutFamily, usize>,
    /// Triangle rows added at integral points.
    pub lazy_rows: usize,
    pub lp_iterations: u64,
    pub warm_start_value: Option<f64>,
    pub wall_time: f64,
    pub infeasible_reason: Option<String>,
    /// Largest `|LP objective - evaluated objective|` at accepted integral points.
    pub integral_mismatch: f64,
    pub cut_log: Vec<CutLogEntry>,
    pub node_log: Vec<NodeLogEntry>,
}

impl SolveReport {
    pub fn objective(&self) -> Option<f64> {
        self.evaluation.as_ref().map(|e| e.d)
    }

    /// `(UB - LB) / UB`, zero when both vanish.
    pub fn gap(&self) -> Option<f64> {
        let ub = self.objective()?;
        let lb = self.best_bound?;
        Some(relative_gap(ub, lb))
    }

    pub fn total_cuts(&self) -> usize {
        self.cuts.values().sum()
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "strategy": self.strategy,
            "status": self.status,
            "objective": self.objective(),
            "best_bound": self.best_bound,
            "gap": self.gap(),
            "root_bound": self.root_bound,
            "nodes": self.nodes,
            "cuts": self.cuts.iter().map(|(f, c)| (f.name().to_string(), *c)).collect::<BTreeMap<String, usize>>(),
            "lazy_rows": self.lazy_rows,
            "lp_iterations": self.lp_iterations,
            "warm_start_value": self.warm_start_value,
            "wall_time": self.wall_time,
            "infeasible_reason": self.infeasible_reason,
            "classes": self.incumbent.as_ref().map(|p| p.canonical()),
        })
    }
}

pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    if ub.abs() < 1e-12 {
        if lb.abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((ub - lb) / ub.abs()).max(0.0)
    }
}

/// An open node of the search tree.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: u64,
    pub parent: Option<u64>,
    pub depth: u32,
    /// Lower bound inherited from the parent.
    pub bound: f64,
    /// Edge columns fixed to 0 or 1 on the path from the root.
    pub fixings: Vec<(usize, bool)>,
    /// Final basis of the parent LP and the worker that produced it.
    pub basis_hint: Option<(usize, Basis)>,
}

impl NodeState {
    pub fn root() -> NodeState {
        NodeState { id: 0, parent: None, depth: 0, bound: f64::NEG_INFINITY, fixings: Vec::new(), basis_hint: None }
    }
}

/// Index of the fractional entry closest to 0.5 (lowest index on ties).
pub fn branching_variable(x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in x.iter().enumerate() {
        if (v - v.round()).abs() <= INT_TOL {
            continue;
        }
        let score = (v - 0.5).abs();
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j)
}

/// Children fixing the branching variable to 0 and to 1 (in that order).
///
/// # Panics
/// If `x` is integral.
pub fn branch(node: &NodeState, x: &[f64], bound: f64) -> (NodeState, NodeState) {
    let j = branching_variable(x).expect("branch called on an integral point");
    let child = |value: bool| {
        let mut fixings = node.fixings.clone();
        fixings.push((j, value));
        NodeState { id: 0, parent: Some(node.id), depth: node.depth + 1, bound, fixings, basis_hint: None }
    };
    (child(false), child(true))
}

/// Turns an integral point into a partition over the original nodes.
///
/// Components of the 1-edges become classes; every component must be a
/// clique, there must be `k` of them, sizes must be balanced and dummy
/// nodes are dropped.
pub fn decode_incumbent(x: &[f64], inst: &Instance) -> Result<Partition> {
    let n = inst.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let mut ones = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = x[edge_index(n, i, j)];
            if (v - v.round()).abs() > INT_TOL {
                return Err(Error::Decode(format!("x_{i}_{j} = {v} is fractional")));
            }
            if v > 0.5 {
                ones += 1;
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        classes.entry(r).or_default().push(v);
    }
    let classes: Vec<Vec<usize>> = classes.into_values().collect();
    let clique_edges: usize = classes.iter().map(|c| c.len() * (c.len() - 1) / 2).sum();
    if clique_edges != ones {
        return Err(Error::Decode(format!(
            "transitivity fails: {ones} edges set but components need {clique_edges}"
        )));
    }
    if classes.len() != inst.k() {
        return Err(Error::Decode(format!("{} components, expected k = {}", classes.len(), inst.k())));
    }
    let p = Partition::from_classes(inst.weights(), &classes).map_err(|e| Error::Decode(e.to_string()))?;
    if inst.dummy_count() > 0 {
        p.strip_trailing(inst.original_n(), inst.weights()).map_err(|e| Error::Decode(e.to_string()))
    } else {
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum RowKey {
    Triangle(usize),
    Cut(CutFamily, Vec<usize>, Vec<usize>, Option<usize>),
}

struct SharedRow {
    kind: RowKind,
    row: Row,
}

struct HeapNode(NodeState);

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    /// Max-heap order: smaller bound first, then smaller id.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.bound.total_cmp(&self.0.bound).then(other.0.id.cmp(&self.0.id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stop {
    Time,
    Nodes,
}

struct Incumbent {
    value: f64,
    partition: Partition,
    eval: Evaluation,
}

struct Shared {
    heap: BinaryHeap<HeapNode>,
    /// Bound of the node each worker is processing.
    busy: Vec<Option<f64>>,
    incumbent: Option<Incumbent>,
    next_id: u64,
    nodes: u64,
    stop: Option<Stop>,
    error: Option<Error>,
    rows: Vec<SharedRow>,
    keys: HashSet<RowKey>,
    cuts: BTreeMap<CutFamily, usize>,
    lazy_rows: usize,
    lp_iterations: u64,
    root_bound: Option<f64>,
    integral_mismatch: f64,
    cut_log: Vec<CutLogEntry>,
    node_log: Vec<NodeLogEntry>,
    last_progress: Instant,
}

impl Shared {
    fn cutoff(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |inc| inc.value - 1e-9 * inc.value.abs().max(1.0))
    }

    fn lower_bound(&self) -> Option<f64> {
        let open = self.heap.iter().map(|h| h.0.bound).chain(self.busy.iter().flatten().copied());
        let lb = open.fold(f64::INFINITY, f64::min);
        match &self.incumbent {
            Some(inc) => Some(lb.min(inc.value)),
            None if lb.is_finite() => Some(lb),
            None => None,
        }
    }
}

struct Ctx<'a> {
    orig: &'a Instance,
    strategy: &'a Strategy,
    opts: &'a SolveOptions,
    deadline: Option<Instant>,
    start: Instant,
    shared: Mutex<Shared>,
    cv: Condvar,
}

enum Outcome {
    /// LP infeasible or bound above the cutoff.
    Pruned,
    /// Integral LP point accepted (or rejected as not better).
    Integral,
    Branch(Box<(NodeState, NodeState)>, bool),
    /// Interrupted before finishing; the node must be requeued.
    Interrupted,
}

struct Worker<'a> {
    id: usize,
    ctx: &'a Ctx<'a>,
    model: Model,
    engine: DualSimplex,
    synced: usize,
    rng: SplitMix64,
    base_lower: Vec<f64>,
    base_upper: Vec<f64>,
    touched: Vec<usize>,
    /// The engine holds the final basis of this node id.
    engine_node: Option<u64>,
}

impl<'a> Worker<'a> {
    fn sync(&mut self) -> Result<usize> {
        let sh = self.ctx.shared.lock().unwrap();
        let before = self.synced;
        for r in &sh.rows[self.synced..] {
            match r.kind {
                RowKind::Triangle(idx) => {
                    self.model.add_triangle(idx)?;
                }
                RowKind::Cut(f) => {
                    self.model.add_cut_row(f, r.row.clone())?;
                }
                _ => unreachable!("only triangles and cuts are shared"),
            }
        }
        self.synced = sh.rows.len();
        Ok(self.synced - before)
    }

    fn publish(&mut self, node: u64, tris: &[(usize, f64)], cuts: Vec<Cut>, lazy: bool) {
        let mut sh = self.ctx.shared.lock().unwrap();
        let log = self.ctx.opts.record_cut_log;
        for &(idx, v) in tris {
            if self.model.tri_in_lp[idx] || !sh.keys.insert(RowKey::Triangle(idx)) {
                continue;
            }
            let row = self.model.pool.get(idx).row(self.model.inst.n());
            sh.rows.push(SharedRow { kind: RowKind::Triangle(idx), row });
            *sh.cuts.entry(CutFamily::Triangle).or_default() += 1;
            if lazy {
                sh.lazy_rows += 1;
            }
            if log {
                sh.cut_log.push(CutLogEntry { family: CutFamily::Triangle, violation: v, support: 3, node });
            }
        }
        for cut in cuts {
            let (f, s, t, a) = cut.key();
            if !sh.keys.insert(RowKey::Cut(f, s, t, a)) {
                continue;
            }
            *sh.cuts.entry(cut.family).or_default() += 1;
            if log {
                let support = cut.support.s.len() + cut.support.t.len();
                sh.cut_log.push(CutLogEntry { family: cut.family, violation: cut.violation, support, node });
            }
            sh.rows.push(SharedRow { kind: RowKind::Cut(cut.family), row: cut.row() });
        }
    }

    fn apply_fixings(&mut self, fixings: &[(usize, bool)]) -> Result<()> {
        for &c in &self.touched {
            self.model.lp.set_bounds(c, self.base_lower[c], self.base_upper[c])?;
        }
        self.touched.clear();
        for &(c, one) in fixings {
            let v = if one { 1.0 } else { 0.0 };
            self.model.lp.set_bounds(c, v, v)?;
            self.touched.push(c);
        }
        Ok(())
    }

    fn solve_lp(&mut self) -> Result<crate::simplex::LpResult> {
        let opts = LpOptions { deadline: self.ctx.deadline, ..LpOptions::default() };
        let res = match self.engine.solve(&self.model.lp, &opts) {
            Err(LpError::Numerical(_)) | Err(LpError::IterationLimit(_)) => {
                self.engine = DualSimplex::new(&self.model.lp);
                self.engine.solve(&self.model.lp, &opts)
            }
            other => other,
        };
        let res = res?;
        self.ctx.shared.lock().unwrap().lp_iterations += res.iterations as u64;
        Ok(res)
    }

    fn custom_cuts(&mut self, x: &[f64], nodes_done: u64) -> Vec<Cut> {
        let s = self.ctx.strategy;
        let inst = &self.model.inst;
        let mut out = Vec::new();
        if s.two_partition {
            out.extend(cuts::separate_2partition(inst.n(), x, &mut self.rng));
        }
        if s.weight_cover {
            out.extend(cuts::separate_weight_cover(inst, x));
        }
        let limits = self.ctx.opts.enum_limits;
        if s.weight_lower {
            out.extend(cuts::separate_weight_bounds_exhaustive(inst, x, WeightBound::Lower, limits).cuts);
        }
        let upper_ok = self.ctx.opts.weight_upper_node_limit.is_none_or(|l| nodes_done < l);
        if s.weight_upper && upper_ok {
            out.extend(cuts::separate_weight_bounds_exhaustive(inst, x, WeightBound::Upper, limits).cuts);
        }
        out
    }

    fn expired(&self) -> bool {
        self.ctx.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn process(&mut self, node: &mut NodeState) -> Result<(Outcome, Option<f64>)> {
        self.apply_fixings(&node.fixings.clone())?;
        let continuing = node.parent.is_some() && node.parent == self.engine_node;
        if !continuing {
            if let Some((w, basis)) = &node.basis_hint {
                if *w == self.id {
                    self.engine.load_basis(&self.model.lp, basis);
                }
            }
        }
        let cap = if node.depth == 0 { self.ctx.strategy.root_cut_rounds } else { self.ctx.strategy.tree_cut_rounds };
        let ctx_frac = if node.depth == 0 { SeparationContext::RootFractional } else { SeparationContext::TreeFractional };
        let mut rounds = 0;
        loop {
            if self.expired() {
                return Ok((Outcome::Interrupted, None));
            }
            self.sync()?;
            let res = match self.solve_lp() {
                Err(Error::Lp(LpError::TimeLimit)) => return Ok((Outcome::Interrupted, None)),
                other => other?,
            };
            self.engine_node = Some(node.id);
            if res.status == LpStatus::Infeasible {
                return Ok((Outcome::Pruned, None));
            }
            let bound = node.bound.max(res.objective);
            let (cutoff, nodes_done) = {
                let sh = self.ctx.shared.lock().unwrap();
                (sh.cutoff(), sh.nodes)
            };
            if bound >= cutoff {
                return Ok((Outcome::Pruned, Some(bound)));
            }
            let x = res.x;
            let integral = x.iter().all(|v| (v - v.round()).abs() <= INT_TOL);
            if integral {
                let lazy = self.model.separate_triangles(&x, SeparationContext::Integer);
                if !lazy.is_empty() {
                    self.publish(node.id, &lazy, Vec::new(), true);
                    continue;
                }
                let part = decode_incumbent(&x, &self.model.inst)?;
                let eval = evaluate(self.ctx.orig, &part)?;
                let mut sh = self.ctx.shared.lock().unwrap();
                sh.integral_mismatch = sh.integral_mismatch.max((eval.d - res.objective).abs());
                let better = sh.incumbent.as_ref().is_none_or(|inc| eval.d < inc.value);
                if eval.is_feasible() && better {
                    sh.incumbent = Some(Incumbent { value: eval.d, partition: part, eval });
                }
                return Ok((Outcome::Integral, Some(bound)));
            }
            if rounds >= cap {
                return self.branch_out(node, &x, bound, res.basis);
            }
            let tris = self.model.separate_triangles(&x, ctx_frac);
            let custom = if tris.is_empty() && self.ctx.strategy.custom_cuts() {
                self.custom_cuts(&x, nodes_done)
            } else {
                Vec::new()
            };
            if tris.is_empty() && custom.is_empty() {
                return self.branch_out(node, &x, bound, res.basis);
            }
            self.publish(node.id, &tris, custom, false);
            if self.sync()? == 0 {
                return self.branch_out(node, &x, bound, res.basis);
            }
            rounds += 1;
            if node.depth == 0 {
                node.bound = bound;
            }
        }
    }

    fn branch_out(&mut self, node: &NodeState, x: &[f64], bound: f64, basis: Basis) -> Result<(Outcome, Option<f64>)> {
        let (mut c0, mut c1) = branch(node, x, bound);
        let j = branching_variable(x).unwrap();
        let hint = Some((self.id, basis));
        c0.basis_hint = hint.clone();
        c1.basis_hint = hint;
        Ok((Outcome::Branch(Box::new((c0, c1)), x[j] >= 0.5), Some(bound)))
    }

    fn run(&mut self) {
        let ctx = self.ctx;
        let mut dive: Option<NodeState> = None;
        loop {
            let mut node = match dive.take() {
                Some(n) => {
                    let mut sh = ctx.shared.lock().unwrap();
                    if n.bound >= sh.cutoff() {
                        drop(sh);
                        continue;
                    }
                    sh.busy[self.id] = Some(n.bound);
                    n
                }
                None => {
                    let mut sh = ctx.shared.lock().unwrap();
                    loop {
                        if sh.stop.is_some() || sh.error.is_some() {
                            ctx.cv.notify_all();
                            return;
                        }
                        let cutoff = sh.cutoff();
                        if let Some(h) = sh.heap.pop() {
                            if h.0.bound >= cutoff {
                                continue;
                            }
                            sh.busy[self.id] = Some(h.0.bound);
                            break h.0;
                        }
                        if sh.busy.iter().all(Option::is_none) {
                            ctx.cv.notify_all();
                            return;
                        }
                        sh = ctx.cv.wait_timeout(sh, Duration::from_millis(20)).unwrap().0;
                        if ctx.deadline.is_some_and(|d| Instant::now() >= d) && sh.stop.is_none() {
                            sh.stop = Some(Stop::Time);
                        }
                    }
                }
            };
            {
                let mut sh = ctx.shared.lock().unwrap();
                let stop = if ctx.deadline.is_some_and(|d| Instant::now() >= d) {
                    Some(Stop::Time)
                } else if ctx.opts.node_limit.is_some_and(|l| sh.nodes >= l) {
                    Some(Stop::Nodes)
                } else {
                    None
                };
                if let Some(s) = stop.or(sh.stop) {
                    sh.stop.get_or_insert(s);
                    sh.busy[self.id] = None;
                    sh.heap.push(HeapNode(node));
                    ctx.cv.notify_all();
                    return;
                }
                if node.parent.is_some() && node.id == 0 {
                    node.id = sh.next_id;
                    sh.next_id += 1;
                }
                sh.nodes += 1;
            }
            let parent_bound = node.bound;
            let result = self.process(&mut node);
            let mut sh = ctx.shared.lock().unwrap();
            sh.busy[self.id] = None;
            let (outcome, bound) = match result {
                Ok(r) => r,
                Err(e) => {
                    sh.error.get_or_insert(e);
                    ctx.cv.notify_all();
                    return;
                }
            };
            if node.depth == 0 && !matches!(outcome, Outcome::Interrupted) {
                sh.root_bound = bound;
            }
            if ctx.opts.record_nodes && !matches!(outcome, Outcome::Interrupted) {
                sh.node_log.push(NodeLogEntry { id: node.id, parent: node.parent, depth: node.depth, parent_bound, bound });
            }
            match outcome {
                Outcome::Pruned | Outcome::Integral => {}
                Outcome::Interrupted => {
                    sh.stop.get_or_insert(Stop::Time);
                    sh.heap.push(HeapNode(node));
                    ctx.cv.notify_all();
                    return;
                }
                Outcome::Branch(children, up_first) => {
                    let (c0, c1) = *children;
                    let (first, second) = if up_first { (c1, c0) } else { (c0, c1) };
                    let mut second = second;
                    second.id = sh.next_id;
                    sh.next_id += 1;
                    sh.heap.push(HeapNode(second));
                    ctx.cv.notify_one();
                    dive = Some(first);
                }
            }
            if let Some(every) = ctx.opts.progress_interval {
                if sh.last_progress.elapsed().as_secs_f64() >= every {
                    sh.last_progress = Instant::now();
                    let lb = sh.lower_bound().map(|b| b.min(dive.as_ref().map_or(f64::INFINITY, |d| d.bound)));
                    let ub = sh.incumbent.as_ref().map(|i| i.value);
                    let gap = match (ub, lb) {
                        (Some(u), Some(l)) => format!("{:.2}%", 100.0 * relative_gap(u, l)),
                        _ => "-".into(),
                    };
                    println!(
                        "{:>9.1}s  nodes {:>8}  bound {:>12}  incumbent {:>12}  gap {gap}",
                        ctx.start.elapsed().as_secs_f64(),
                        sh.nodes,
                        lb.map_or("-".into(), |b| format!("{b:.3}")),
                        ub.map_or("-".into(), |u| format!("{u:.3}")),
                    );
                }
            }
        }
    }
}

/// Solves `inst` exactly (or until a limit) with `strategy`.
pub fn solve(inst: &Instance, strategy: &Strategy, opts: &SolveOptions) -> Result<SolveReport> {
    let start = Instant::now();
    let mut report = SolveReport {
        strategy: strategy.name.clone(),
        status: SolveStatus::Infeasible,
        incumbent: None,
        evaluation: None,
        best_bound: None,
        root_bound: None,
        nodes: 0,
        cuts: BTreeMap::new(),
        lazy_rows: 0,
        lp_iterations: 0,
        warm_start_value: None,
        wall_time: 0.0,
        infeasible_reason: None,
        integral_mismatch: 0.0,
        cut_log: Vec::new(),
        node_log: Vec::new(),
    };
    if !inst.check_necessary_feasibility() {
        report.infeasible_reason = Some("the necessary weight condition on k fails".into());
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok(report);
    }
    let work = if strategy.formulation == Formulation::F1 && !inst.n().is_multiple_of(inst.k()) {
        inst.add_dummies()?
    } else {
        inst.clone()
    };
    let model = Model::build(&work, &strategy.model_config())?;

    let mut incumbent = None;
    if strategy.warm_start {
        let iters = opts.tabu_iterations.unwrap_or_else(|| tabu::iteration_limit(inst.n()));
        let t = tabu::run(inst, split_seed(opts.seed, 0), iters);
        if t.eval.is_feasible() {
            report.warm_start_value = Some(t.eval.d);
            incumbent = Some(Incumbent { value: t.eval.d, partition: t.best, eval: t.eval });
        }
    }

    let threads = opts.threads.max(1);
    let mut heap = BinaryHeap::new();
    heap.push(HeapNode(NodeState::root()));
    let ctx = Ctx {
        orig: inst,
        strategy,
        opts,
        deadline: opts.time_limit.map(|t| start + Duration::from_secs_f64(t.max(0.0))),
        start,
        shared: Mutex::new(Shared {
            heap,
            busy: vec![None; threads],
            incumbent,
            next_id: 1,
            nodes: 0,
            stop: None,
            error: None,
            rows: Vec::new(),
            keys: HashSet::new(),
            cuts: BTreeMap::new(),
            lazy_rows: 0,
            lp_iterations: 0,
            root_bound: None,
            integral_mismatch: 0.0,
            cut_log: Vec::new(),
            node_log: Vec::new(),
            last_progress: start,
        }),
        cv: Condvar::new(),
    };
    let make_worker = |id: usize| Worker {
        id,
        ctx: &ctx,
        engine: DualSimplex::new(&model.lp),
        model: model.clone(),
        synced: 0,
        rng: SplitMix64::new(split_seed(opts.seed, 1 + id as u64)),
        base_lower: model.lp.lower().to_vec(),
        base_upper: model.lp.upper().to_vec(),
        touched: Vec::new(),
        engine_node: None,
    };
    if threads == 1 {
        make_worker(0).run();
    } else {
        std::thread::scope(|s| {
            for id in 0..threads {
                let mut w = make_worker(id);
                s.spawn(move || w.run());
            }
        });
    }

    let sh = ctx.shared.into_inner().unwrap();
    if let Some(e) = sh.error {
        return Err(e);
    }
    report.best_bound = sh.lower_bound();
    report.root_bound = sh.root_bound;
    report.nodes = sh.nodes;
    report.cuts = sh.cuts;
    report.lazy_rows = sh.lazy_rows;
    report.lp_iterations = sh.lp_iterations;
    report.integral_mismatch = sh.integral_mismatch;
    report.cut_log = sh.cut_log;
    report.node_log = sh.node_log;
    report.status = match sh.stop {
        Some(Stop::Time) => SolveStatus::TimeLimit,
        Some(Stop::Nodes) => SolveStatus::NodeLimit,
        None if sh.incumbent.is_some() => SolveStatus::Optimal,
        None => {
            report.infeasible_reason = Some("no balanced weight-feasible partition exists".into());
            SolveStatus::Infeasible
        }
    };
    if let Some(inc) = sh.incumbent {
        if report.status == SolveStatus::Optimal {
            report.best_bound = Some(inc.value);
        }
        report.incumbent = Some(inc.partition);
        report.evaluation = Some(inc.eval);
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    #[test]
    fn branching_rule() {
        assert_eq!(branching_variable(&[0.0, 0.5, 1.0]), Some(1));
        assert_eq!(branching_variable(&[0.3, 0.49, 1.0]), Some(1));
        assert_eq!(branching_variable(&[0.6, 0.4]), Some(0));
        assert_eq!(branching_variable(&[0.0, 1.0]), None);
        let (c0, c1) = branch(&NodeState::root(), &[0.3, 0.49], 5.0);
        assert_eq!(c0.fixings, vec![(1, false)]);
        assert_eq!(c1.fixings, vec![(1, true)]);
        assert_eq!((c0.depth, c0.bound), (1, 5.0));
    }

    #[test]
    fn decode_rejects_bad_points() {
        let inst = Instance::generate_random(4, 2, 1).unwrap();
        let inst = Instance::new(2, inst.weights().to_vec(), inst.dist_matrix().to_vec(), 0.0, 10.0, []).unwrap();
        let p = Partition::from_classes(inst.weights(), &[vec![0, 1], vec![2, 3]]).unwrap();
        let x = p.to_incidence();
        assert_eq!(decode_incumbent(&x, &inst).unwrap().canonical(), p.canonical());
        // 0-1 and 1-2 but not 0-2: not transitive.
        let mut bad = vec![0.0; 6];
        bad[edge_index(4, 0, 1)] = 1.0;
        bad[edge_index(4, 1, 2)] = 1.0;
        assert!(decode_incumbent(&bad, &inst).is_err());
        // all singletons: four components.
        assert!(decode_incumbent(&[0.0; 6], &inst).is_err());
    }

    #[test]
    fn small_instances_match_oracle() {
        for seed in 0..6 {
            let inst = Instance::generate_random(8, 2, seed).unwrap();
            let expect = oracle::optimum(&inst).unwrap().map(|(d, _)| d);
            for s in [Strategy::s1(), Strategy::s2(), Strategy::s5()] {
                let r = solve(&inst, &s, &SolveOptions { seed, ..Default::default() }).unwrap();
                match expect {
                    Some(d) => {
                        assert_eq!(r.status, SolveStatus::Optimal);
                        assert!((r.objective().unwrap() - d).abs() <= 1e-9 * d.max(1.0), "{} {} vs {d}", s.name, r.objective().unwrap());
                        assert!(r.gap().unwrap() <= 1e-6);
                    }
                    None => assert_eq!(r.status, SolveStatus::Infeasible),
                }
            }
        }
    }

    #[test]
    fn infeasible_window() {
        let n = 4;
        let mut dist = vec![1.0; n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
        }
        let inst = Instance::new(2, vec![10.0, 0.1, 0.1, 0.1], dist, 5.0, 10.2, []).unwrap();
        let r = solve(&inst, &Strategy::s5(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.incumbent.is_none());
    }

    #[test]
    fn tiny_time_limit_reports_gap() {
        let inst = Instance::generate_random(16, 3, 2).unwrap();
        let r = solve(&inst, &Strategy::s4(), &SolveOptions { time_limit: Some(0.001), ..Default::default() }).unwrap();
        if r.status == SolveStatus::TimeLimit {
            if let Some(g) = r.gap() {
                assert!(g >= 0.0);
            }
        }
    }
}

//! Dense dual simplex for bounded LPs.
//!
//! Problems have the form `min c.x` subject to sparse rows `a.x (<=,=,>=) b`
//! and finite bounds `l <= x <= u`. The engine works on the *active set*
//! representation of a vertex: `n` linearly independent constraints, taken
//! from the variable bounds and the rows, each written as `g.x <= h` and held
//! with equality. The basis matrix `G` stacks their `g` vectors, so its size
//! is `n x n` no matter how many rows the LP has, which suits the
//! partitioning models (a few hundred columns, thousands of triangle rows).
//!
//! The multipliers `mu = -G^-T c` certify optimality when nonnegative on
//! inequality constraints. They do not depend on right-hand sides, so an
//! optimal active set stays dual feasible after bounds change (branching)
//! and after rows are appended (cuts). The dual simplex then only has to
//! restore primal feasibility. A cold start uses the box vertex where every
//! variable sits at the bound favoured by its cost, which is dual feasible
//! by construction.
//!
//! Pricing picks the most violated constraint scaled by its norm; the ratio
//! test is a two-pass Harris test. After a streak of degenerate pivots the
//! engine switches to Bland's rule (smallest constraint id) until a pivot
//! makes progress. `G^-1` is updated by rank-one row replacement and rebuilt
//! from scratch every `refactor_interval` pivots.

use std::time::Instant;

use nalgebra::DMatrix;
use thiserror::Error;

pub const FEAS_TOL: f64 = 1e-7;
pub const OPT_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const NONE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("column index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("bounds of column {0} are not finite or empty")]
    BadBounds(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("time limit reached")]
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Row {
        Row { coeffs, relation, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (zero or negative when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.relation {
            Relation::Le => act - self.rhs,
            Relation::Ge => self.rhs - act,
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<LinearProgram, LpError> {
        let n = objective.len();
        if lower.len() != n || upper.len() != n {
            return Err(LpError::IndexOutOfRange(lower.len().min(upper.len())));
        }
        for j in 0..n {
            if !lower[j].is_finite() || !upper[j].is_finite() || lower[j] > upper[j] {
                return Err(LpError::BadBounds(j));
            }
        }
        Ok(LinearProgram { objective, lower, upper, rows: Vec::new() })
    }

    pub fn ncols(&self) -> usize {
        self.objective.len()
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    pub fn add_row(&mut self, row: Row) -> Result<usize, LpError> {
        if let Some(&(j, _)) = row.coeffs.iter().find(|(j, _)| *j >= self.ncols()) {
            return Err(LpError::IndexOutOfRange(j));
        }
        self.rows.push(row);
        Ok(self.rows.len() - 1)
    }

    pub fn add_rows(&mut self, rows: impl IntoIterator<Item = Row>) -> Result<(), LpError> {
        for r in rows {
            self.add_row(r)?;
        }
        Ok(())
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> Result<(), LpError> {
        if j >= self.ncols() {
            return Err(LpError::IndexOutOfRange(j));
        }
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(LpError::BadBounds(j));
        }
        self.lower[j] = lo;
        self.upper[j] = hi;
        Ok(())
    }

    pub fn fix_var(&mut self, j: usize, value: f64) -> Result<(), LpError> {
        self.set_bounds(j, value, value)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

/// One member of the active set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisEntry {
    Lower(usize),
    Upper(usize),
    /// Row `index`, held as `a.x <= b` (`flipped == false`) or `-a.x <= -b`.
    Row { index: usize, flipped: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Basis {
    pub entries: Vec<BasisEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// Row duals with the usual sign convention for minimization:
    /// `<=` rows nonpositive, `>=` rows nonnegative.
    pub duals: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub refactor_interval: usize,
    /// Degenerate pivots in a row before switching to Bland's rule.
    pub bland_after: usize,
    pub max_iterations: Option<usize>,
    pub deadline: Option<Instant>,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { refactor_interval: 100, bland_after: 50, max_iterations: None, deadline: None }
    }
}

/// Solves `lp` from scratch, or from `warm` when it describes a usable
/// dual feasible basis.
pub fn solve_lp(lp: &LinearProgram, warm: Option<&Basis>) -> Result<LpResult, LpError> {
    let mut engine = DualSimplex::new(lp);
    if let Some(b) = warm {
        engine.load_basis(lp, b);
    }
    engine.solve(lp, &LpOptions::default())
}

/// Stateful engine that keeps its factorization between calls.
#[derive(Debug, Clone)]
pub struct DualSimplex {
    n: usize,
    binv: Vec<f64>,
    active: Vec<BasisEntry>,
    /// Position in `active` per constraint id (`j`, `n + j`, `2n + row`).
    pos: Vec<u32>,
    mu: Vec<f64>,
    x: Vec<f64>,
    row_norm: Vec<f64>,
    since_refactor: usize,
    total_iterations: usize,
}

impl DualSimplex {
    pub fn new(lp: &LinearProgram) -> DualSimplex {
        let n = lp.ncols();
        let mut eng = DualSimplex {
            n,
            binv: Vec::new(),
            active: Vec::new(),
            pos: Vec::new(),
            mu: Vec::new(),
            x: vec![0.0; n],
            row_norm: Vec::new(),
            since_refactor: 0,
            total_iterations: 0,
        };
        eng.sync_rows(lp);
        eng.cold_start(lp);
        eng
    }

    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    pub fn basis(&self) -> Basis {
        Basis { entries: self.active.clone() }
    }

    fn id_of(&self, e: BasisEntry) -> usize {
        match e {
            BasisEntry::Lower(j) => j,
            BasisEntry::Upper(j) => self.n + j,
            BasisEntry::Row { index, .. } => 2 * self.n + index,
        }
    }

    fn sync_rows(&mut self, lp: &LinearProgram) {
        let want = 2 * self.n + lp.nrows();
        if self.pos.len() < want {
            self.pos.resize(want, NONE);
        }
        for i in self.row_norm.len()..lp.nrows() {
            let norm = lp.rows[i].coeffs.iter().map(|(_, a)| a * a).sum::<f64>().sqrt();
            self.row_norm.push(norm.max(1e-12));
        }
    }

    fn cold_start(&mut self, lp: &LinearProgram) {
        let n = self.n;
        for p in self.pos.iter_mut() {
            *p = NONE;
        }
        self.active.clear();
        self.mu.clear();
        self.binv = vec![0.0; n * n];
        for j in 0..n {
            let c = lp.objective[j];
            if c >= 0.0 {
                self.active.push(BasisEntry::Lower(j));
                self.binv[j * n + j] = -1.0;
                self.mu.push(c);
            } else {
                self.active.push(BasisEntry::Upper(j));
                self.binv[j * n + j] = 1.0;
                self.mu.push(-c);
            }
            let id = self.id_of(self.active[j]);
            self.pos[id] = j as u32;
        }
        self.since_refactor = 0;
    }

    /// Installs `basis` when it is well formed, nonsingular and dual
    /// feasible; otherwise keeps the current state. Returns whether the
    /// basis was taken.
    pub fn load_basis(&mut self, lp: &LinearProgram, basis: &Basis) -> bool {
        self.sync_rows(lp);
        if basis.entries.len() != self.n {
            return false;
        }
        let mut seen = vec![false; self.pos.len()];
        for &e in &basis.entries {
            let ok = match e {
                BasisEntry::Lower(j) | BasisEntry::Upper(j) => j < self.n,
                BasisEntry::Row { index, .. } => index < lp.nrows(),
            };
            if !ok {
                return false;
            }
            let id = self.id_of(e);
            if seen[id] {
                return false;
            }
            seen[id] = true;
        }
        let saved = (self.active.clone(), self.binv.clone(), self.mu.clone(), self.pos.clone());
        self.active = basis.entries.clone();
        for p in self.pos.iter_mut() {
            *p = NONE;
        }
        for (p, &e) in self.active.iter().enumerate() {
            let id = self.id_of(e);
            self.pos[id] = p as u32;
        }
        if self.refactor(lp).is_ok() && self.dual_feasible(lp) {
            true
        } else {
            (self.active, self.binv, self.mu, self.pos) = saved;
            false
        }
    }

    fn is_equality(&self, lp: &LinearProgram, e: BasisEntry) -> bool {
        matches!(e, BasisEntry::Row { index, .. } if lp.rows[index].relation == Relation::Eq)
    }

    fn dual_feasible(&self, lp: &LinearProgram) -> bool {
        self.active
            .iter()
            .zip(&self.mu)
            .all(|(&e, &m)| m >= -OPT_TOL || self.is_equality(lp, e))
    }

    /// `(g, h)` of an active-set member, `g` as sparse pairs.
    fn constraint(&self, lp: &LinearProgram, e: BasisEntry) -> (Vec<(usize, f64)>, f64) {
        match e {
            BasisEntry::Lower(j) => (vec![(j, -1.0)], -lp.lower[j]),
            BasisEntry::Upper(j) => (vec![(j, 1.0)], lp.upper[j]),
            BasisEntry::Row { index, flipped } => {
                let r = &lp.rows[index];
                let s = if flipped { -1.0 } else { 1.0 };
                (r.coeffs.iter().map(|&(j, a)| (j, s * a)).collect(), s * r.rhs)
            }
        }
    }

    fn rhs_of(&self, lp: &LinearProgram, e: BasisEntry) -> f64 {
        match e {
            BasisEntry::Lower(j) => -lp.lower[j],
            BasisEntry::Upper(j) => lp.upper[j],
            BasisEntry::Row { index, flipped } => {
                if flipped {
                    -lp.rows[index].rhs
                } else {
                    lp.rows[index].rhs
                }
            }
        }
    }

    /// Rebuilds the basis inverse from scratch. Bound entries are unit rows,
    /// so only the block of row entries restricted to the columns without a
    /// bound entry needs a dense inverse.
    fn refactor(&mut self, lp: &LinearProgram) -> Result<(), LpError> {
        let n = self.n;
        let singular = || LpError::Numerical("singular basis".into());
        // bound_pos[j]: (position, sign) of the bound entry on column j.
        let mut bound_pos: Vec<Option<(usize, f64)>> = vec![None; n];
        let mut row_pos = Vec::new();
        for (p, &e) in self.active.iter().enumerate() {
            let (j, s) = match e {
                BasisEntry::Lower(j) => (j, -1.0),
                BasisEntry::Upper(j) => (j, 1.0),
                BasisEntry::Row { .. } => {
                    row_pos.push(p);
                    continue;
                }
            };
            if bound_pos[j].replace((p, s)).is_some() {
                return Err(singular());
            }
        }
        let free: Vec<usize> = (0..n).filter(|&j| bound_pos[j].is_none()).collect();
        if free.len() != row_pos.len() {
            return Err(singular());
        }
        let m = free.len();
        let mut free_idx = vec![usize::MAX; n];
        for (fi, &j) in free.iter().enumerate() {
            free_idx[j] = fi;
        }
        let rows: Vec<Vec<(usize, f64)>> = row_pos.iter().map(|&p| self.constraint(lp, self.active[p]).0).collect();
        let mut a = DMatrix::<f64>::zeros(m, m);
        for (ri, coeffs) in rows.iter().enumerate() {
            for &(j, v) in coeffs {
                if free_idx[j] != usize::MAX {
                    a[(ri, free_idx[j])] += v;
                }
            }
        }
        let q = if m == 0 { a } else { a.lu().try_inverse().ok_or_else(singular)? };
        self.binv.clear();
        self.binv.resize(n * n, 0.0);
        for (j, b) in bound_pos.iter().enumerate() {
            if let Some((p, s)) = *b {
                self.binv[j * n + p] = s;
            }
        }
        for (ri, &p) in row_pos.iter().enumerate() {
            for (fi, &j) in free.iter().enumerate() {
                self.binv[j * n + p] = q[(fi, ri)];
            }
        }
        for (ri, coeffs) in rows.iter().enumerate() {
            for &(j, v) in coeffs {
                if let Some((p, s)) = bound_pos[j] {
                    let f = v * s;
                    for (fi, &jf) in free.iter().enumerate() {
                        self.binv[jf * n + p] -= q[(fi, ri)] * f;
                    }
                }
            }
        }
        // mu = -Binv^T c
        self.mu = vec![0.0; n];
        for r in 0..n {
            let c = lp.objective[r];
            if c != 0.0 {
                let row = &self.binv[r * n..(r + 1) * n];
                for (m, b) in self.mu.iter_mut().zip(row) {
                    *m -= c * b;
                }
            }
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn recompute_x(&mut self, lp: &LinearProgram) {
        let n = self.n;
        let h: Vec<f64> = self.active.iter().map(|&e| self.rhs_of(lp, e)).collect();
        for r in 0..n {
            let row = &self.binv[r * n..(r + 1) * n];
            self.x[r] = row.iter().zip(&h).map(|(b, h)| b * h).sum();
        }
    }

    /// Most violated inactive constraint, violations scaled by row norm.
    /// Under Bland's rule the first violated one in id order.
    fn price(&self, lp: &LinearProgram, bland: bool) -> Option<BasisEntry> {
        let n = self.n;
        let mut best: Option<(BasisEntry, f64)> = None;
        let mut consider = |e: BasisEntry, scaled: f64| {
            if bland {
                if best.is_none() {
                    best = Some((e, scaled));
                }
            } else if best.is_none_or(|(_, s)| scaled > s) {
                best = Some((e, scaled));
            }
        };
        for j in 0..n {
            let xj = self.x[j];
            if xj < lp.lower[j] - FEAS_TOL && self.pos[j] == NONE {
                let v = lp.lower[j] - xj;
                consider(BasisEntry::Lower(j), v);
            } else if xj > lp.upper[j] + FEAS_TOL && self.pos[n + j] == NONE {
                let v = xj - lp.upper[j];
                consider(BasisEntry::Upper(j), v);
            }
        }
        for (i, row) in lp.rows.iter().enumerate() {
            if self.pos[2 * n + i] != NONE {
                continue;
            }
            let act = row.activity(&self.x);
            let (viol, flipped) = match row.relation {
                Relation::Le => (act - row.rhs, false),
                Relation::Ge => (row.rhs - act, true),
                Relation::Eq => {
                    if act >= row.rhs {
                        (act - row.rhs, false)
                    } else {
                        (row.rhs - act, true)
                    }
                }
            };
            if viol > FEAS_TOL {
                consider(BasisEntry::Row { index: i, flipped }, viol / self.row_norm[i]);
            }
        }
        best.map(|(e, _)| e)
    }

    /// Runs dual simplex pivots until `lp` is solved.
    pub fn solve(&mut self, lp: &LinearProgram, opts: &LpOptions) -> Result<LpResult, LpError> {
        if lp.ncols() != self.n {
            *self = DualSimplex::new(lp);
        }
        self.sync_rows(lp);
        let n = self.n;
        let limit = opts.max_iterations.unwrap_or(20 * (2 * n + lp.nrows()) + 10_000);
        let mut iterations = 0usize;
        let mut degenerate_streak = 0usize;
        let mut restarts = 0usize;
        let mut fresh = false;
        if !self.dual_feasible(lp) {
            self.cold_start(lp);
        }
        self.recompute_x(lp);
        let mut v = vec![0.0; n];
        let mut col = vec![0.0; n];
        loop {
            if iterations >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            if iterations.is_multiple_of(32) {
                if let Some(d) = opts.deadline {
                    if Instant::now() >= d {
                        return Err(LpError::TimeLimit);
                    }
                }
            }
            let bland = degenerate_streak >= opts.bland_after;
            let Some(enter) = self.price(lp, bland) else {
                return Ok(self.result(lp, LpStatus::Optimal, iterations));
            };
            let (g, h_q) = self.constraint(lp, enter);
            // v = Binv^T g
            v.iter_mut().for_each(|x| *x = 0.0);
            for &(j, a) in &g {
                let row = &self.binv[j * n..(j + 1) * n];
                for (vp, b) in v.iter_mut().zip(row) {
                    *vp += a * b;
                }
            }
            let leave = self.ratio_test(lp, &v, bland);
            let Some(leave) = leave else {
                if !fresh {
                    // Confirm with a clean factorization before declaring.
                    self.refactor(lp)?;
                    self.recompute_x(lp);
                    fresh = true;
                    if !self.dual_feasible(lp) {
                        restarts += 1;
                        if restarts > 3 {
                            return Err(LpError::Numerical("lost dual feasibility".into()));
                        }
                        self.cold_start(lp);
                        self.recompute_x(lp);
                    }
                    continue;
                }
                return Ok(self.result(lp, LpStatus::Infeasible, iterations));
            };
            fresh = false;
            let vi = v[leave];
            let t = self.mu[leave].max(0.0) / vi;
            for p in 0..n {
                if p != leave {
                    self.mu[p] -= t * v[p];
                }
            }
            self.mu[leave] = t;
            for r in 0..n {
                col[r] = self.binv[r * n + leave];
            }
            let gx: f64 = g.iter().map(|&(j, a)| a * self.x[j]).sum();
            let step = (h_q - gx) / vi;
            for r in 0..n {
                self.x[r] += col[r] * step;
            }
            for r in 0..n {
                let cr = col[r];
                if cr == 0.0 {
                    continue;
                }
                let f = cr / vi;
                let row = &mut self.binv[r * n..(r + 1) * n];
                for (b, &vp) in row.iter_mut().zip(v.iter()) {
                    *b -= f * vp;
                }
                row[leave] += f;
            }
            let old = self.active[leave];
            let old_id = self.id_of(old);
            self.pos[old_id] = NONE;
            self.active[leave] = enter;
            let new_id = self.id_of(enter);
            self.pos[new_id] = leave as u32;

            iterations += 1;
            self.total_iterations += 1;
            self.since_refactor += 1;
            if t.abs() <= 1e-12 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            if self.since_refactor >= opts.refactor_interval {
                if self.refactor(lp).is_err() || !self.dual_feasible(lp) {
                    restarts += 1;
                    if restarts > 3 {
                        return Err(LpError::Numerical("repeated refactorization failure".into()));
                    }
                    self.cold_start(lp);
                }
                self.recompute_x(lp);
            }
        }
    }

    /// Harris two-pass ratio test over inequality members with `v_p > 0`.
    fn ratio_test(&self, lp: &LinearProgram, v: &[f64], bland: bool) -> Option<usize> {
        let mut bound = f64::INFINITY;
        for p in 0..self.n {
            if v[p] > PIVOT_TOL && !self.is_equality(lp, self.active[p]) {
                bound = bound.min((self.mu[p].max(0.0) + OPT_TOL) / v[p]);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<usize> = None;
        for p in 0..self.n {
            if v[p] > PIVOT_TOL && !self.is_equality(lp, self.active[p]) && self.mu[p].max(0.0) / v[p] <= bound {
                best = match best {
                    None => Some(p),
                    Some(b) if bland => {
                        let (rb, rp) = (self.mu[b].max(0.0) / v[b], self.mu[p].max(0.0) / v[p]);
                        if rp < rb || (rp == rb && self.id_of(self.active[p]) < self.id_of(self.active[b])) {
                            Some(p)
                        } else {
                            Some(b)
                        }
                    }
                    Some(b) => {
                        if v[p] > v[b] {
                            Some(p)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
        }
        best
    }

    fn result(&self, lp: &LinearProgram, status: LpStatus, iterations: usize) -> LpResult {
        let mut duals = vec![0.0; lp.nrows()];
        for (p, &e) in self.active.iter().enumerate() {
            if let BasisEntry::Row { index, flipped } = e {
                duals[index] = if flipped { self.mu[p] } else { -self.mu[p] };
            }
        }
        LpResult {
            status,
            objective: lp.objective_value(&self.x),
            x: self.x.clone(),
            duals,
            basis: self.basis(),
            iterations,
        }
    }
}

/// Relative gap between the primal objective and the dual objective built
/// from `res.duals`, plus the largest dual sign violation. Both are zero up
/// to rounding for an optimal result.
pub fn duality_residual(lp: &LinearProgram, res: &LpResult) -> (f64, f64) {
    let n = lp.ncols();
    let mut reduced = lp.objective.clone();
    let mut dual_obj = 0.0;
    let mut sign_viol: f64 = 0.0;
    for (row, &y) in lp.rows.iter().zip(&res.duals) {
        for &(j, a) in &row.coeffs {
            reduced[j] -= y * a;
        }
        dual_obj += y * row.rhs;
        match row.relation {
            Relation::Le => sign_viol = sign_viol.max(y),
            Relation::Ge => sign_viol = sign_viol.max(-y),
            Relation::Eq => {}
        }
    }
    for j in 0..n {
        let r = reduced[j];
        dual_obj += if r > 0.0 { r * lp.lower[j] } else { r * lp.upper[j] };
    }
    let primal = lp.objective_value(&res.x);
    ((primal - dual_obj).abs() / primal.abs().max(1.0), sign_viol)
}

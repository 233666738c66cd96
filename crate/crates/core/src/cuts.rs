//! Valid inequalities beyond the triangle rows, and their separation.
//!
//! All routines work on a point `x` indexed by [`edge_index`] and never
//! emit an inequality that some balanced, weight-feasible partition
//! violates.
//!
//! * 2-partition with `S = {v}`:
//!   `sum_{j in T} x_vj - sum_{j1 < j2 in T} x_j1j2 <= 1`.
//! * Weight-Cover for `w(T) > wu`:
//!   `sum_{E(T)} x <= (|T| - 1)(|T| - 2) / 2`.
//! * Weight-Lowerbound for `w(T) > wl`, `|T| <= fl`, `r = w(T) - wl`, `i in T`:
//!   `w_i + sum_{T - i} w_j x_ij + sum_{V - T} (w_j + r) x_ij >= w(T)`.
//! * Weight-Upperbound for `w(T) < wu`, `r = wu - w(T)`,
//!   `S = {j not in T : w_j > r}` non-empty, `i in T`:
//!   `w_i + sum_{T - i} w_j x_ij + sum_{S} (w_j - r) x_ij <= w(T)`.
//!
//! The constant `w_i` is moved to the right-hand side in emitted rows.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::instance::Instance;
use crate::model::edge_index;
use crate::rng::SplitMix64;
use crate::simplex::{Relation, Row};
use crate::solution::WEIGHT_TOL;

/// Minimum violation for the 2-partition and Weight-Cover heuristics.
pub const HEURISTIC_MIN_VIOLATION: f64 = 0.1;
/// Exhaustive weight-bound separation: minimum violation relative to `w(T)`.
pub const EXHAUSTIVE_RELATIVE_VIOLATION: f64 = 0.01;
const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CutFamily {
    Triangle,
    TwoPartition,
    WeightCover,
    WeightLower,
    WeightUpper,
}

impl CutFamily {
    pub const ALL: [CutFamily; 5] = [
        CutFamily::Triangle,
        CutFamily::TwoPartition,
        CutFamily::WeightCover,
        CutFamily::WeightLower,
        CutFamily::WeightUpper,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CutFamily::Triangle => "triangle",
            CutFamily::TwoPartition => "two_partition",
            CutFamily::WeightCover => "weight_cover",
            CutFamily::WeightLower => "weight_lower",
            CutFamily::WeightUpper => "weight_upper",
        }
    }
}

/// Sets that generated a cut.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CutSupport {
    pub s: Vec<usize>,
    pub t: Vec<usize>,
    pub anchor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub family: CutFamily,
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    /// Amount by which the separating point violates the cut.
    pub violation: f64,
    pub support: CutSupport,
}

impl Cut {
    pub fn row(&self) -> Row {
        Row::new(self.coeffs.clone(), self.relation, self.rhs)
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(c, a)| a * x[c]).sum()
    }

    /// Positive when `x` violates the cut.
    pub fn violation_at(&self, x: &[f64]) -> f64 {
        self.row().violation(x)
    }

    /// Canonical identity used to suppress duplicates.
    pub fn key(&self) -> (CutFamily, Vec<usize>, Vec<usize>, Option<usize>) {
        let mut s = self.support.s.clone();
        let mut t = self.support.t.clone();
        s.sort_unstable();
        t.sort_unstable();
        (self.family, s, t, self.support.anchor)
    }
}

fn is_fractional(v: f64) -> bool {
    (v - v.round()).abs() > INT_TOL
}

/// Greedy 2-partition separation with `S = {v}`.
///
/// For every node `v` with more than four fractional incident values,
/// up to five sets `T` are grown from two random seeds; each `T` is then
/// forbidden for the remaining attempts at `v`, whether or not it produced a
/// cut.
pub fn separate_2partition(n: usize, x: &[f64], rng: &mut SplitMix64) -> Vec<Cut> {
    let xv = |a: usize, b: usize| x[edge_index(n, a, b)];
    let mut cuts = Vec::new();
    for v in 0..n {
        let w: Vec<usize> = (0..n).filter(|&u| u != v && is_fractional(xv(u, v))).collect();
        if w.len() <= 4 {
            continue;
        }
        let mut forbidden: BTreeSet<usize> = BTreeSet::new();
        for _ in 0..5 {
            let mut free: Vec<usize> = w.iter().copied().filter(|u| !forbidden.contains(u)).collect();
            if free.len() < 2 {
                break;
            }
            rng.shuffle(&mut free);
            let mut t = vec![free[0], free[1]];
            let mut rest: Vec<usize> = free[2..].to_vec();
            loop {
                let pick = rest.iter().position(|&r| xv(r, v) - t.iter().map(|&q| xv(r, q)).sum::<f64>() > 0.0);
                match pick {
                    Some(p) => t.push(rest.remove(p)),
                    None => break,
                }
            }
            t.sort_unstable();
            let mut coeffs: Vec<(usize, f64)> = t.iter().map(|&j| (edge_index(n, v, j), 1.0)).collect();
            for (a, &j1) in t.iter().enumerate() {
                for &j2 in &t[a + 1..] {
                    coeffs.push((edge_index(n, j1, j2), -1.0));
                }
            }
            let lhs: f64 = coeffs.iter().map(|&(c, a)| a * x[c]).sum();
            let violation = lhs - 1.0;
            if violation >= HEURISTIC_MIN_VIOLATION - 1e-12 {
                cuts.push(Cut {
                    family: CutFamily::TwoPartition,
                    coeffs,
                    relation: Relation::Le,
                    rhs: 1.0,
                    violation,
                    support: CutSupport { s: vec![v], t: t.clone(), anchor: None },
                });
            }
            forbidden.extend(t);
        }
    }
    cuts
}

fn set_weight(inst: &Instance, t: &[usize]) -> f64 {
    t.iter().map(|&i| inst.weight(i)).sum()
}

/// `w(T) > wu` and every `T - l` fits under `wu`.
pub fn is_minimal_cover(inst: &Instance, t: &[usize]) -> bool {
    let wt = set_weight(inst, t);
    wt > inst.wu() + WEIGHT_TOL && t.iter().all(|&l| wt - inst.weight(l) <= inst.wu() + WEIGHT_TOL)
}

fn weight_cover_cut(inst: &Instance, x: &[f64], t: &[usize]) -> Cut {
    let n = inst.n();
    let mut coeffs = Vec::new();
    for (a, &i) in t.iter().enumerate() {
        for &j in &t[a + 1..] {
            coeffs.push((edge_index(n, i, j), 1.0));
        }
    }
    let s = t.len() as f64;
    let rhs = (s - 1.0) * (s - 2.0) / 2.0;
    let lhs: f64 = coeffs.iter().map(|&(c, _)| x[c]).sum();
    Cut {
        family: CutFamily::WeightCover,
        coeffs,
        relation: Relation::Le,
        rhs,
        violation: lhs - rhs,
        support: CutSupport { s: Vec::new(), t: t.to_vec(), anchor: None },
    }
}

/// `q(i) = w_i + sum_j w_j x_ij`, the fractional weight of the class of `i`.
pub fn fractional_class_weight(inst: &Instance, x: &[f64]) -> Vec<f64> {
    let n = inst.n();
    (0..n)
        .map(|i| inst.weight(i) + (0..n).filter(|&j| j != i).map(|j| inst.weight(j) * x[edge_index(n, i, j)]).sum::<f64>())
        .collect()
}

fn combinations(items: &[usize], size: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(items: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for p in start..items.len() {
            if items.len() - p < size - cur.len() {
                break;
            }
            cur.push(items[p]);
            rec(items, size, p + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, size, 0, &mut Vec::with_capacity(size), out);
}

/// Structured Weight-Cover separation over sets of size 4 and 5.
///
/// Nodes are ranked by [`fractional_class_weight`]; each candidate `T`
/// takes `t - 2` nodes among the `t + 2` heaviest and two more arbitrary
/// nodes. Only minimal covers violated by at least 0.1 are returned.
pub fn separate_weight_cover(inst: &Instance, x: &[f64]) -> Vec<Cut> {
    let n = inst.n();
    let q = fractional_class_weight(inst, x);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut cuts = Vec::new();
    for t in [4usize, 5] {
        if t > n {
            continue;
        }
        let top = &order[..(t + 2).min(n)];
        let mut heads = Vec::new();
        combinations(top, t - 2, &mut heads);
        for head in heads {
            for a in 0..n {
                if head.contains(&a) {
                    continue;
                }
                for b in (a + 1)..n {
                    if head.contains(&b) {
                        continue;
                    }
                    let mut set = head.clone();
                    set.push(a);
                    set.push(b);
                    set.sort_unstable();
                    if !is_minimal_cover(inst, &set) || !seen.insert(set.clone()) {
                        continue;
                    }
                    let cut = weight_cover_cut(inst, x, &set);
                    if cut.violation >= HEURISTIC_MIN_VIOLATION - 1e-12 {
                        cuts.push(cut);
                    }
                }
            }
        }
    }
    cuts
}

/// Limits for exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumLimits {
    /// Refuse instances with more nodes than this.
    pub max_n: usize,
    /// Maximum number of candidate inequalities examined.
    pub budget: usize,
}

impl Default for EnumLimits {
    fn default() -> Self {
        EnumLimits { max_n: 30, budget: 2_000_000 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExhaustiveCuts {
    pub cuts: Vec<Cut>,
    /// Enumeration stopped early (budget or size limit).
    pub truncated: bool,
    pub examined: usize,
}

/// Every minimal Weight-Cover with `min_size <= |T| <= max_size` violated
/// by at least `min_violation`.
pub fn separate_weight_cover_exhaustive(
    inst: &Instance,
    x: &[f64],
    min_size: usize,
    max_size: usize,
    min_violation: f64,
    limits: EnumLimits,
) -> ExhaustiveCuts {
    let mut out = ExhaustiveCuts::default();
    if inst.n() > limits.max_n {
        out.truncated = true;
        return out;
    }
    let nodes: Vec<usize> = (0..inst.n()).collect();
    for size in min_size.max(2)..=max_size.min(inst.n()) {
        let ok = for_each_subset(&nodes, size, &mut |t| {
            out.examined += 1;
            if out.examined > limits.budget {
                return false;
            }
            if is_minimal_cover(inst, t) {
                let cut = weight_cover_cut(inst, x, t);
                if cut.violation >= min_violation - 1e-12 && cut.violation > 1e-9 {
                    out.cuts.push(cut);
                }
            }
            true
        });
        if !ok {
            out.truncated = true;
            break;
        }
    }
    out
}

/// Calls `f` on every `size`-subset in lexicographic order until it
/// returns false. Returns false if stopped early.
fn for_each_subset(items: &[usize], size: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    fn rec(items: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == size {
            return f(cur);
        }
        for p in start..items.len() {
            if items.len() - p < size - cur.len() {
                break;
            }
            cur.push(items[p]);
            let go = rec(items, size, p + 1, cur, f);
            cur.pop();
            if !go {
                return false;
            }
        }
        true
    }
    rec(items, size, 0, &mut Vec::with_capacity(size), f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightBound {
    Lower,
    Upper,
}

/// The `(T, i)` Weight-Lowerbound row, if `T` qualifies.
pub fn weight_lower_cut(inst: &Instance, x: &[f64], t: &[usize], i: usize) -> Option<Cut> {
    let n = inst.n();
    let wt = set_weight(inst, t);
    let r = wt - inst.wl();
    if r <= WEIGHT_TOL || t.len() > inst.size_bounds().fl || !t.contains(&i) {
        return None;
    }
    let mut coeffs = Vec::with_capacity(n - 1);
    for j in (0..n).filter(|&j| j != i) {
        let a = if t.contains(&j) { inst.weight(j) } else { inst.weight(j) + r };
        if a != 0.0 {
            coeffs.push((edge_index(n, i, j), a));
        }
    }
    coeffs.sort_unstable_by_key(|&(c, _)| c);
    let rhs = wt - inst.weight(i);
    let lhs: f64 = coeffs.iter().map(|&(c, a)| a * x[c]).sum();
    Some(Cut {
        family: CutFamily::WeightLower,
        coeffs,
        relation: Relation::Ge,
        rhs,
        violation: rhs - lhs,
        support: CutSupport { s: Vec::new(), t: t.to_vec(), anchor: Some(i) },
    })
}

/// The `(T, i)` Weight-Upperbound row, if `T` qualifies.
pub fn weight_upper_cut(inst: &Instance, x: &[f64], t: &[usize], i: usize) -> Option<Cut> {
    let n = inst.n();
    let wt = set_weight(inst, t);
    let r = inst.wu() - wt;
    if r <= WEIGHT_TOL || !t.contains(&i) {
        return None;
    }
    let s: Vec<usize> = (0..n).filter(|j| !t.contains(j) && inst.weight(*j) > r + WEIGHT_TOL).collect();
    if s.is_empty() {
        return None;
    }
    let mut coeffs = Vec::new();
    for &j in t.iter().filter(|&&j| j != i) {
        if inst.weight(j) != 0.0 {
            coeffs.push((edge_index(n, i, j), inst.weight(j)));
        }
    }
    for &j in &s {
        coeffs.push((edge_index(n, i, j), inst.weight(j) - r));
    }
    coeffs.sort_unstable_by_key(|&(c, _)| c);
    let rhs = wt - inst.weight(i);
    let lhs: f64 = coeffs.iter().map(|&(c, a)| a * x[c]).sum();
    Some(Cut {
        family: CutFamily::WeightUpper,
        coeffs,
        relation: Relation::Le,
        rhs,
        violation: lhs - rhs,
        support: CutSupport { s, t: t.to_vec(), anchor: Some(i) },
    })
}

/// Exhaustive Weight-Lowerbound / Weight-Upperbound separation.
///
/// Lowerbound sets have `fl - 1 <= |T| <= fl`; Upperbound sets have
/// `fl - 1 <= |T| <= fu`. A cut is kept when its violation is at least 1%
/// of `w(T)`.
pub fn separate_weight_bounds_exhaustive(inst: &Instance, x: &[f64], family: WeightBound, limits: EnumLimits) -> ExhaustiveCuts {
    let mut out = ExhaustiveCuts::default();
    if inst.n() > limits.max_n {
        out.truncated = true;
        return out;
    }
    let sb = inst.size_bounds();
    let (lo, hi) = match family {
        WeightBound::Lower => (sb.fl.saturating_sub(1).max(1), sb.fl),
        WeightBound::Upper => (sb.fl.saturating_sub(1).max(1), sb.fu),
    };
    let nodes: Vec<usize> = (0..inst.n()).collect();
    for size in lo..=hi.min(inst.n()) {
        let ok = for_each_subset(&nodes, size, &mut |t| {
            for &i in t {
                out.examined += 1;
                if out.examined > limits.budget {
                    return false;
                }
                let cut = match family {
                    WeightBound::Lower => weight_lower_cut(inst, x, t, i),
                    WeightBound::Upper => weight_upper_cut(inst, x, t, i),
                };
                let Some(cut) = cut else { break };
                let wt = cut.rhs + inst.weight(i);
                if cut.violation > 1e-9 && cut.violation >= EXHAUSTIVE_RELATIVE_VIOLATION * wt {
                    out.cuts.push(cut);
                }
            }
            true
        });
        if !ok {
            out.truncated = true;
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst_with(weights: Vec<f64>, wl: f64, wu: f64) -> Instance {
        let n = weights.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    dist[i * n + j] = (i + j) as f64;
                }
            }
        }
        Instance::new(2, weights, dist, wl, wu, []).unwrap()
    }

    #[test]
    fn star_point_gives_two_partition_cut() {
        // v = 0, fractional neighbours 1..=5 at 0.5, nothing among them.
        let n = 6;
        let mut x = vec![0.0; n * (n - 1) / 2];
        for j in 1..n {
            x[edge_index(n, 0, j)] = 0.5;
        }
        let mut rng = SplitMix64::new(1);
        let cuts = separate_2partition(n, &x, &mut rng);
        let at_zero: Vec<&Cut> = cuts.iter().filter(|c| c.support.s == vec![0]).collect();
        assert!(!at_zero.is_empty());
        // greedy growth takes every node of W: lhs = 5 * 0.5.
        assert!((at_zero[0].violation - 1.5).abs() < 1e-12);
        assert!((at_zero[0].violation_at(&x) - at_zero[0].violation).abs() < 1e-12);
    }

    #[test]
    fn three_leaf_star_violation() {
        let n = 4;
        let mut x = [0.0; 6];
        for j in 1..4 {
            x[edge_index(n, 0, j)] = 0.5;
        }
        let coeffs: Vec<(usize, f64)> = (1..4).map(|j| (edge_index(n, 0, j), 1.0)).collect();
        let lhs: f64 = coeffs.iter().map(|&(c, a)| a * x[c]).sum();
        assert_eq!(lhs - 1.0, 0.5);
    }

    #[test]
    fn integral_point_gives_no_two_partition_cut() {
        let n = 8;
        let x: Vec<f64> = (0..n * (n - 1) / 2).map(|c| (c % 2) as f64).collect();
        let mut rng = SplitMix64::new(3);
        assert!(separate_2partition(n, &x, &mut rng).is_empty());
    }

    #[test]
    fn two_partition_sets_are_disjoint_per_node() {
        let n = 12;
        let mut rng = SplitMix64::new(11);
        let x: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.uniform_f64(0.05, 0.6)).collect();
        let cuts = separate_2partition(n, &x, &mut SplitMix64::new(5));
        for v in 0..n {
            let sets: Vec<&Vec<usize>> = cuts.iter().filter(|c| c.support.s == vec![v]).map(|c| &c.support.t).collect();
            for a in 0..sets.len() {
                for b in (a + 1)..sets.len() {
                    assert!(sets[a].iter().all(|u| !sets[b].contains(u)));
                }
            }
        }
        let again = separate_2partition(n, &x, &mut SplitMix64::new(5));
        assert_eq!(cuts, again);
    }

    #[test]
    fn weight_cover_triangle_example() {
        let inst = inst_with(vec![3.0, 3.0, 3.0, 0.5], 0.0, 5.0);
        let x = vec![1.0; 6];
        let cut = weight_cover_cut(&inst, &x, &[0, 1, 2]);
        assert_eq!(cut.rhs, 1.0);
        assert_eq!(cut.violation, 2.0);
        // {0,1,2} is not minimal: {0,1} already exceeds 5.
        assert!(!is_minimal_cover(&inst, &[0, 1, 2]));
        assert!(is_minimal_cover(&inst, &[0, 1]));
    }

    #[test]
    fn heuristic_cover_sizes_and_minimality() {
        let g = Instance::generate_random(12, 3, 4).unwrap();
        let inst = Instance::new(3, g.weights().to_vec(), g.dist_matrix().to_vec(), 0.0, g.weights().iter().sum::<f64>() / 6.0, []).unwrap();
        let x = vec![0.6; 66];
        let cuts = separate_weight_cover(&inst, &x);
        for c in &cuts {
            assert!(c.support.t.len() == 4 || c.support.t.len() == 5);
            assert!(is_minimal_cover(&inst, &c.support.t));
            assert!(c.violation >= 0.1 - 1e-12);
        }
    }

    #[test]
    fn singleton_upper_bound_is_trivial() {
        let inst = inst_with(vec![0.5, 0.9, 0.9, 0.2], 0.0, 1.0);
        let x = vec![0.0; 6];
        let cut = weight_upper_cut(&inst, &x, &[0], 0).unwrap();
        assert_eq!(cut.rhs, 0.0);
        assert!(cut.coeffs.iter().all(|&(_, a)| a > 0.0));
        assert!(cut.violation <= 0.0);
    }

    #[test]
    fn lower_bound_template() {
        let inst = inst_with(vec![0.5, 0.4, 0.3, 0.2], 0.6, 2.0);
        let x = vec![0.0; 6];
        // T = {0, 1}: w(T) = 0.9, r = 0.3.
        let cut = weight_lower_cut(&inst, &x, &[0, 1], 0).unwrap();
        assert_eq!(cut.relation, Relation::Ge);
        assert!((cut.rhs - 0.4).abs() < 1e-12);
        let a: Vec<f64> = cut.coeffs.iter().map(|c| c.1).collect();
        assert!((a[0] - 0.4).abs() < 1e-12 && (a[1] - 0.6).abs() < 1e-12 && (a[2] - 0.5).abs() < 1e-12);
        assert!(weight_lower_cut(&inst, &x, &[0, 1, 2], 0).is_none());
    }
}

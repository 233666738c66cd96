//! Helpers shared by the integration tests: an independent textbook LP
//! solver, random LP and instance generators, and brute-force feasible sets.
#![allow(dead_code)]

use kpart::rng::{split_seed, SplitMix64};
use kpart::simplex::{LinearProgram, Relation, Row};
use kpart::{Instance, Partition};

/// Dense two-phase tableau simplex with Bland's rule. Returns the optimal
/// objective, or `None` when the LP is infeasible. Slow and simple on purpose.
pub fn textbook_lp(lp: &LinearProgram) -> Option<f64> {
    let n = lp.ncols();
    let lo = lp.lower();
    let hi = lp.upper();
    // Shift x = y + lo, so y >= 0; upper bounds become ordinary rows.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for r in lp.rows() {
        let mut a = vec![0.0; n];
        let mut b = r.rhs;
        for &(j, v) in &r.coeffs {
            a[j] += v;
            b -= v * lo[j];
        }
        rows.push((a, r.relation, b));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        rows.push((a, Relation::Le, hi[j] - lo[j]));
    }
    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    // Columns: y (n), slacks, artificials (m), rhs.
    let art0 = n + slack_count;
    let width = art0 + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    let mut basis = vec![0usize; m];
    let mut s = n;
    for (i, (a, rel, b)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(a);
        match rel {
            Relation::Le => {
                t[i][s] = 1.0;
                s += 1;
            }
            Relation::Ge => {
                t[i][s] = -1.0;
                s += 1;
            }
            Relation::Eq => {}
        }
        t[i][width - 1] = *b;
        if *b < 0.0 {
            for v in t[i].iter_mut() {
                *v = -*v;
            }
        }
        t[i][art0 + i] = 1.0;
        basis[i] = art0 + i;
    }

    let phase1: Vec<f64> = (0..width - 1).map(|j| if j >= art0 { 1.0 } else { 0.0 }).collect();
    run_tableau(&mut t, &mut basis, &phase1, width - 1);
    let infeas: f64 = basis.iter().enumerate().filter(|(_, &b)| b >= art0).map(|(i, _)| t[i][width - 1]).sum();
    if infeas > 1e-7 {
        return None;
    }
    // Drive zero-level artificials out where possible.
    for i in 0..m {
        if basis[i] >= art0 {
            if let Some(j) = (0..art0).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    let mut c2 = vec![0.0; width - 1];
    c2[..n].copy_from_slice(lp.objective());
    run_tableau(&mut t, &mut basis, &c2, art0);
    let mut y = vec![0.0; width - 1];
    for (i, &b) in basis.iter().enumerate() {
        y[b] = t[i][width - 1];
    }
    Some((0..n).map(|j| lp.objective()[j] * (y[j] + lo[j])).sum())
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
    let p = t[r][c];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
    }
    basis[r] = c;
}

/// Minimizes `cost` over the tableau; only columns below `enter_limit` may
/// enter the basis.
fn run_tableau(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], enter_limit: usize) {
    let rhs = cost.len();
    loop {
        let entering = (0..enter_limit).find(|&j| {
            let reduced = cost[j] - basis.iter().enumerate().map(|(i, &b)| cost[b] * t[i][j]).sum::<f64>();
            reduced < -1e-9
        });
        let Some(c) = entering else { return };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..t.len() {
            if t[i][c] > 1e-9 {
                let ratio = t[i][rhs] / t[i][c];
                let better = match leave {
                    None => true,
                    Some((l, best)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Bounded variables make the LP bounded, so a leaving row exists.
        let (r, _) = leave.expect("bounded LP");
        pivot(t, basis, r, c);
    }
}

/// Random dense LP with at most `max_dim` rows and columns. Most are built
/// around a feasible point; roughly one in eight gets an extra row that is
/// likely to cut that point off.
pub fn random_lp(seed: u64, max_dim: usize) -> LinearProgram {
    let mut rng = SplitMix64::new(seed);
    let n = 1 + rng.index(max_dim);
    let m = 1 + rng.index(max_dim);
    let lo: Vec<f64> = (0..n).map(|_| rng.uniform_f64(-2.0, 1.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.uniform_f64(0.2, 3.0)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.uniform_f64(-1.0, 1.0)).collect();
    let x0: Vec<f64> = (0..n).map(|j| rng.uniform_f64(lo[j], hi[j])).collect();
    let mut lp = LinearProgram::new(c, lo, hi).unwrap();
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.next_f64() < 0.6 {
                coeffs.push((j, rng.uniform_f64(-1.0, 1.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let (rel, rhs) = match rng.index(6) {
            0 => (Relation::Eq, act),
            1 | 2 => (Relation::Ge, act - rng.uniform_f64(0.0, 1.0)),
            _ => (Relation::Le, act + rng.uniform_f64(0.0, 1.0)),
        };
        lp.add_row(Row::new(coeffs, rel, rhs)).unwrap();
    }
    if rng.index(8) == 0 {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
        let top: f64 = lp.upper().iter().sum();
        lp.add_row(Row::new(coeffs, Relation::Ge, top - rng.uniform_f64(-0.5, 0.5))).unwrap();
    }
    lp
}

/// A uniformly shuffled balanced partition of `n` nodes into `k` classes.
pub fn random_balanced(n: usize, k: usize, rng: &mut SplitMix64) -> Partition {
    let mut assign: Vec<usize> = (0..n).map(|v| v % k).collect();
    rng.shuffle(&mut assign);
    Partition::from_assignment(&vec![1.0; n], k, assign).unwrap()
}

/// Random generator instances with `n` in `ns` and `k` in `ks` (subject to
/// `n >= 2k`), drawn from `master`.
pub fn instance_sweep(master: u64, count: usize, ns: std::ops::RangeInclusive<usize>, ks: &[usize]) -> Vec<(u64, Instance)> {
    let mut out = Vec::new();
    let mut idx = 0;
    while out.len() < count {
        idx += 1;
        let s = split_seed(master, idx);
        let mut rng = SplitMix64::new(s);
        let n = rng.range_inclusive(*ns.start() as u64, *ns.end() as u64) as usize;
        let k = ks[rng.index(ks.len())];
        if n < 2 * k {
            continue;
        }
        out.push((s, Instance::generate_random(n, k, s).unwrap()));
    }
    out
}

/// Incidence vectors of every feasible partition.
pub fn feasible_incidences(inst: &Instance) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    kpart::oracle::enumerate(inst, |p, _| out.push(p.to_incidence())).unwrap();
    out
}

/// Values agree to `tol` relative to `max(1, |a|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(1.0)
}

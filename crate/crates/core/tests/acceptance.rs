//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance` runs all of them; numeric arguments
//! (`cargo test --test acceptance -- 1 9`) restrict the run.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::*;
use kpart::bnc::{solve, SolveOptions, SolveStatus, Strategy};
use kpart::cuts::{
    separate_2partition, separate_weight_bounds_exhaustive, separate_weight_cover, separate_weight_cover_exhaustive,
    Cut, CutFamily, EnumLimits, WeightBound,
};
use kpart::model::{edge_count, Formulation, Model, ModelConfig};
use kpart::rng::{split_seed, SplitMix64};
use kpart::simplex::{duality_residual, solve_lp, LpStatus};
use kpart::tabu::iteration_limit;
use kpart::{evaluate, Instance, SizeBounds};

/// Relative tolerance for comparing objective values of partitions.
const OBJ_TOL: f64 = 1e-6;

type Outcome = (bool, String);

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn same_objective(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => close(a, b, OBJ_TOL),
        _ => false,
    }
}

fn solved_objective(inst: &Instance, strategy: &Strategy, seed: u64) -> Option<f64> {
    let opts = SolveOptions { seed, ..SolveOptions::default() };
    let rep = solve(inst, strategy, &opts).expect("solve");
    assert!(matches!(rep.status, SolveStatus::Optimal | SolveStatus::Infeasible), "unlimited solve must finish");
    rep.objective()
}

fn criterion_1() -> Outcome {
    let instances = instance_sweep(1, 200, 6..=12, &[2, 3, 4]);
    let s5 = Strategy::s5();
    let mut mismatches = Vec::new();
    let mut infeasible = 0;
    for (seed, inst) in &instances {
        let want = kpart::oracle::optimum(inst).unwrap().map(|(d, _)| d);
        infeasible += want.is_none() as usize;
        let got = solved_objective(inst, &s5, *seed);
        if !same_objective(want, got) {
            mismatches.push(format!("seed {seed}: oracle {want:?} vs S5 {got:?}"));
        }
    }
    (
        mismatches.is_empty(),
        format!("{} instances ({} infeasible), {} mismatches {:?}", instances.len(), infeasible, mismatches.len(), mismatches.first()),
    )
}

fn criterion_2() -> Outcome {
    let instances: Vec<_> =
        instance_sweep(2, 400, 5..=12, &[2, 3, 4, 5]).into_iter().filter(|(_, i)| i.n() % i.k() != 0).take(50).collect();
    let (s1, s2) = (Strategy::s1(), Strategy::s2());
    let mut mismatches = Vec::new();
    for (seed, inst) in &instances {
        let a = solved_objective(inst, &s1, *seed);
        let b = solved_objective(inst, &s2, *seed);
        if !same_objective(a, b) {
            mismatches.push(format!("seed {seed}: S1 {a:?} vs S2 {b:?}"));
        }
    }
    (instances.len() == 50 && mismatches.is_empty(), format!("{} instances with k not dividing n, {} mismatches {:?}", instances.len(), mismatches.len(), mismatches.first()))
}

fn criterion_3() -> Outcome {
    let mut rng = SplitMix64::new(3);
    let mut bad = 0;
    for _ in 0..1000 {
        let n = rng.range_inclusive(4, 40) as usize;
        let k = rng.range_inclusive(2, (n / 2) as u64) as usize;
        let p = random_balanced(n, k, &mut rng);
        let intra = p.to_incidence().iter().filter(|&&v| v == 1.0).count();
        bad += (intra != SizeBounds::new(n, k).beta) as usize;
    }
    let mut collisions = 0;
    for n in 4..=60 {
        let betas: Vec<usize> = (2..=n / 2).map(|k| SizeBounds::new(n, k).beta).collect();
        collisions += betas.windows(2).filter(|w| w[0] <= w[1]).count();
    }
    (bad == 0 && collisions == 0, format!("1000 partitions, {bad} wrong intra-edge counts; {collisions} beta collisions for n <= 60"))
}

/// Points at which cuts are separated: the root LP optimum, mixtures of
/// feasible partitions and uniform noise.
fn probe_points(inst: &Instance, feasible: &[Vec<f64>], rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    let m = edge_count(inst.n());
    let mut pts = Vec::new();
    let model = Model::build(inst, &ModelConfig::on_demand(Formulation::F2)).unwrap();
    let lp = solve_lp(&model.lp, None).unwrap();
    if lp.status == LpStatus::Optimal {
        pts.push(lp.x);
    }
    if !feasible.is_empty() {
        for parts in [2, 3, 3] {
            let mut x = vec![0.0; m];
            for _ in 0..parts {
                let f = &feasible[rng.index(feasible.len())];
                for (a, b) in x.iter_mut().zip(f) {
                    *a += b / parts as f64;
                }
            }
            pts.push(x);
        }
    }
    for _ in 0..3 {
        pts.push((0..m).map(|_| rng.next_f64()).collect());
    }
    pts
}

fn criterion_4() -> Outcome {
    let instances = instance_sweep(4, 50, 6..=10, &[2, 3]);
    let mut rng = SplitMix64::new(4);
    let mut counts: BTreeMap<CutFamily, usize> = CutFamily::ALL.iter().map(|&f| (f, 0)).collect();
    let mut violated = Vec::new();
    let mut feasible_total = 0;
    let limits = EnumLimits::default();
    for (seed, inst) in &instances {
        let feasible = feasible_incidences(inst);
        feasible_total += feasible.len();
        let n = inst.n();
        let model = Model::build(inst, &ModelConfig::all_triangles(Formulation::F2)).unwrap();
        let mut cuts: Vec<Cut> = Vec::new();
        for t in model.pool.triangles().iter().filter(|t| !t.redundant) {
            let row = t.row(n);
            *counts.get_mut(&CutFamily::Triangle).unwrap() += 1;
            if let Some(f) = feasible.iter().find(|f| row.violation(f) > 1e-9) {
                violated.push(format!("seed {seed}: triangle {} at {:?}", t.name(), f));
            }
        }
        for x in probe_points(inst, &feasible, &mut rng) {
            cuts.extend(separate_2partition(n, &x, &mut rng));
            cuts.extend(separate_weight_cover(inst, &x));
            cuts.extend(separate_weight_cover_exhaustive(inst, &x, 2, n, 1e-9, limits).cuts);
            cuts.extend(separate_weight_bounds_exhaustive(inst, &x, WeightBound::Lower, limits).cuts);
            cuts.extend(separate_weight_bounds_exhaustive(inst, &x, WeightBound::Upper, limits).cuts);
        }
        for cut in &cuts {
            *counts.get_mut(&cut.family).unwrap() += 1;
            if let Some(f) = feasible.iter().find(|f| cut.violation_at(f) > 1e-9) {
                violated.push(format!("seed {seed}: {} cut {:?} violated by a feasible partition ({})", cut.family.name(), cut.support, cut.violation_at(f)));
            }
        }
    }
    let every_family = counts.values().all(|&c| c > 0);
    (
        violated.is_empty() && every_family,
        format!(
            "{} instances, {} feasible partitions, cuts checked {:?}, {} violated {:?}",
            instances.len(),
            feasible_total,
            counts.iter().map(|(f, c)| (f.name(), *c)).collect::<Vec<_>>(),
            violated.len(),
            violated.first()
        ),
    )
}

fn criterion_5() -> Outcome {
    let v = iteration_limit(44);
    (v == 113_352, format!("it_limit(44) = {v}"))
}

fn criterion_6() -> Outcome {
    let mut hits = 0;
    let mut total = 0;
    let mut idx = 0;
    while total < 200 {
        idx += 1;
        let s = split_seed(6, idx);
        let n = 6 + (s % 5) as usize;
        let k = [2, 3, 4][((s >> 8) % 3) as usize];
        if n < 2 * k {
            continue;
        }
        let inst = Instance::generate_random(n, k, s).unwrap();
        let Some((opt, _)) = kpart::oracle::optimum(&inst).unwrap() else { continue };
        total += 1;
        let res = kpart::tabu::run(&inst, s, iteration_limit(n));
        let eval = evaluate(&inst, &res.best).unwrap();
        hits += (eval.is_feasible() && close(eval.d, opt, 1e-9)) as usize;
    }
    let rate = hits as f64 / total as f64;
    (rate >= 0.9, format!("tabu reached the optimum on {hits}/{total} instances ({:.1}%, need 90%)", 100.0 * rate))
}

struct LadderRun {
    nodes: f64,
    time: f64,
}

/// S3, S4, S5 and S4 with Weight-Cover cuts on twenty n = 21, k = 4
/// instances. Shared by the ladder criteria so it only runs once.
fn ladder() -> BTreeMap<&'static str, Vec<LadderRun>> {
    let mut s4wc = Strategy::s4();
    s4wc.name = "S4+WC".into();
    s4wc.weight_cover = true;
    let strategies = [("S3", Strategy::s3()), ("S4", Strategy::s4()), ("S5", Strategy::s5()), ("S4+WC", s4wc)];
    let mut out: BTreeMap<&'static str, Vec<LadderRun>> = BTreeMap::new();
    for i in 0..20 {
        let s = split_seed(7, i + 1);
        let inst = Instance::generate_random(21, 4, s).unwrap();
        for (name, strat) in &strategies {
            let opts = SolveOptions { seed: s, time_limit: Some(60.0), ..SolveOptions::default() };
            let t0 = Instant::now();
            let rep = solve(&inst, strat, &opts).unwrap();
            let time = t0.elapsed().as_secs_f64();
            out.entry(name).or_default().push(LadderRun { nodes: rep.nodes as f64, time });
        }
    }
    out
}

fn medians(runs: &[LadderRun]) -> (f64, f64) {
    (median(runs.iter().map(|r| r.nodes).collect()), median(runs.iter().map(|r| r.time).collect()))
}

fn criterion_7(l: &BTreeMap<&'static str, Vec<LadderRun>>) -> Outcome {
    let (n3, t3) = medians(&l["S3"]);
    let (n4, t4) = medians(&l["S4"]);
    let (n5, t5) = medians(&l["S5"]);
    (
        n5 <= n4 && t4 < t3,
        format!("median nodes/time over 20 instances: S3 {n3}/{t3:.2}s, S4 {n4}/{t4:.2}s, S5 {n5}/{t5:.2}s"),
    )
}

fn criterion_8(l: &BTreeMap<&'static str, Vec<LadderRun>>) -> Outcome {
    let (n4, _) = medians(&l["S4"]);
    let (nwc, _) = medians(&l["S4+WC"]);
    (nwc < n4, format!("median nodes S4 {n4} vs S4 with Weight-Cover cuts {nwc}"))
}

fn criterion_9() -> Outcome {
    let mut bad = Vec::new();
    let mut infeasible = 0;
    let mut worst_residual: f64 = 0.0;
    for i in 0..500 {
        let lp = random_lp(split_seed(9, i), 30);
        let want = textbook_lp(&lp);
        let got = solve_lp(&lp, None).unwrap();
        match (want, got.status) {
            (None, LpStatus::Infeasible) => infeasible += 1,
            (Some(obj), LpStatus::Optimal) => {
                let (gap, sign) = duality_residual(&lp, &got);
                worst_residual = worst_residual.max(gap).max(sign);
                if !close(obj, got.objective, 1e-6) || gap > 1e-6 || sign > 1e-6 {
                    bad.push(format!("lp {i}: textbook {obj} vs {} (residual {gap:e}, {sign:e})", got.objective));
                }
            }
            (w, s) => bad.push(format!("lp {i}: textbook {w:?} vs status {s:?}")),
        }
    }
    (
        bad.is_empty(),
        format!("500 LPs ({infeasible} infeasible), worst duality residual {worst_residual:.1e}, {} disagreements {:?}", bad.len(), bad.first()),
    )
}

fn criterion_10() -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/realignment44.toml");
    let inst = match Instance::load(path) {
        Ok(i) => i,
        Err(e) => return (false, format!("cannot load {path}: {e}")),
    };
    let strat = Strategy::s5();
    let model = match Model::build(&inst, &strat.model_config()) {
        Ok(m) => m,
        Err(e) => return (false, format!("model build failed: {e}")),
    };
    let fixed_forbidden = (0..model.vars.len()).filter(|&c| model.vars.reasons(c).forbidden).count();
    let pairs_fixed = inst.forbidden().iter().all(|&(i, j)| {
        let c = model.vars.index(i, j);
        model.vars.reasons(c).forbidden && model.lp.upper()[c] == 0.0
    });
    let opts = SolveOptions { seed: 10, time_limit: Some(30.0), ..SolveOptions::default() };
    let rep = solve(&inst, &strat, &opts).unwrap();
    let status_ok = matches!(rep.status, SolveStatus::Optimal | SolveStatus::TimeLimit);
    let incumbent_ok = rep.evaluation.as_ref().is_some_and(|e| e.is_feasible() && e.forbidden_hits == 0);
    let gap = rep.gap();
    let gap_ok = gap.is_some_and(|g| (0.0..=1.0).contains(&g)) && rep.best_bound.unwrap_or(f64::INFINITY) <= rep.objective().unwrap_or(0.0) * (1.0 + 1e-9);
    (
        inst.n() == 44 && inst.k() == 8 && inst.forbidden().len() == 22 && fixed_forbidden == 22 && pairs_fixed && status_ok && incumbent_ok && gap_ok,
        format!(
            "n={} k={} forbidden {} (fixed {fixed_forbidden}), {} rows; {:?} after {} nodes, UB {:?} LB {:?} gap {:?}",
            inst.n(),
            inst.k(),
            inst.forbidden().len(),
            model.lp.nrows(),
            rep.status,
            rep.nodes,
            rep.objective(),
            rep.best_bound,
            gap
        ),
    )
}

fn report(c: u32, (ok, detail): Outcome, secs: f64) -> bool {
    println!("criterion {c}: {} - {detail} [{secs:.1}s]", if ok { "PASS" } else { "FAIL" });
    ok
}

fn timed(c: u32, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let out = f();
    report(c, out, t0.elapsed().as_secs_f64())
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |c: u32| selected.is_empty() || selected.contains(&c);
    let mut results = Vec::new();
    let early: [fn() -> Outcome; 6] = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6];
    for (c, f) in (1..).zip(early) {
        if wanted(c) {
            results.push(timed(c, f));
        }
    }
    if wanted(7) || wanted(8) {
        let t0 = Instant::now();
        let l = ladder();
        let secs = t0.elapsed().as_secs_f64();
        if wanted(7) {
            results.push(report(7, criterion_7(&l), secs));
        }
        if wanted(8) {
            results.push(report(8, criterion_8(&l), 0.0));
        }
    }
    if wanted(9) {
        results.push(timed(9, criterion_9));
    }
    if wanted(10) {
        results.push(timed(10, criterion_10));
    }
    let failed = results.iter().filter(|ok| !**ok).count();
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

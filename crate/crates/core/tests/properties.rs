//! Property tests for the invariants the solver relies on.

mod common;

use common::*;
use kpart::bnc::decode_incumbent;
use kpart::cuts::{separate_2partition, separate_weight_bounds_exhaustive, separate_weight_cover, EnumLimits, WeightBound};
use kpart::model::{EdgeVarMap, TriPool};
use kpart::rng::SplitMix64;
use kpart::simplex::{solve_lp, LpStatus, Relation, Row};
use kpart::tabu::{neighbors_1move, neighbors_2exchange, TabuState};
use kpart::{evaluate, Instance, Partition, SizeBounds};
use proptest::prelude::*;

fn unit_instance(n: usize, k: usize) -> Instance {
    let mut dist = vec![1.0; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
    }
    Instance::new(k, vec![1.0; n], dist, 0.0, n as f64, []).unwrap()
}

fn n_and_k(max_n: usize) -> impl Strategy<Value = (usize, usize)> {
    (4..=max_n).prop_flat_map(|n| (Just(n), 2..=n / 2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn balanced_partitions_have_beta_intra_edges((n, k) in n_and_k(40), seed in any::<u64>()) {
        let p = random_balanced(n, k, &mut SplitMix64::new(seed));
        let ones = p.to_incidence().iter().filter(|&&v| v == 1.0).count();
        prop_assert_eq!(ones, SizeBounds::new(n, k).beta);
    }

    #[test]
    fn beta_strictly_decreases_in_k(n in 4usize..=60) {
        for k in 2..n / 2 {
            prop_assert!(SizeBounds::new(n, k).beta > SizeBounds::new(n, k + 1).beta);
        }
    }

    #[test]
    fn incidence_round_trips_through_decoding((n, k) in n_and_k(24), seed in any::<u64>()) {
        let inst = unit_instance(n, k);
        let p = random_balanced(n, k, &mut SplitMix64::new(seed));
        let q = decode_incumbent(&p.to_incidence(), &inst).unwrap();
        prop_assert_eq!(q.canonical(), p.canonical());
    }

    #[test]
    fn incremental_tabu_values_match_full_evaluation((n, k) in n_and_k(14), seed in any::<u64>()) {
        let mut inst = Instance::generate_random(n, k, seed).unwrap();
        if n > 5 {
            inst = inst.with_forbidden([(0, 1), (2, 5)]).unwrap();
        }
        let start = random_balanced(n, k, &mut SplitMix64::new(seed ^ 1));
        let state = TabuState::new(&inst, start.clone());
        let moves: Vec<_> = neighbors_1move(&start).chain(neighbors_2exchange(&start)).collect();
        for mv in moves {
            let mut q = start.clone();
            match mv {
                kpart::tabu::Move::Shift { v, to } => q.apply_move(v, to, inst.weights()),
                kpart::tabu::Move::Exchange { v, u } => q.apply_exchange(v, u, inst.weights()),
            }
            let full = evaluate(&inst, &q).unwrap().f;
            prop_assert!(close(state.value_after(mv), full, 1e-9), "{:?}: {} vs {}", mv, state.value_after(mv), full);
        }
    }

    #[test]
    fn triangle_deciles_are_ordered_and_equitable((n, k) in n_and_k(16), seed in any::<u64>()) {
        let inst = Instance::generate_random(n, k, seed).unwrap();
        let pool = TriPool::new(&inst, &EdgeVarMap::new(&inst));
        let sizes = pool.decile_sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), 3 * n * (n - 1) * (n - 2) / 6);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let keys: Vec<f64> = pool.triangles().iter().map(|t| t.key).collect();
        prop_assert!(keys.windows(2).all(|w| w[0] <= w[1]));
        for d in 1..=10 {
            prop_assert!(pool.decile_range(d).all(|i| pool.get(i).decile as usize == d));
        }
    }

    #[test]
    fn separated_cuts_hold_for_every_feasible_partition(n in 6usize..=8, k in 2usize..=3, seed in any::<u64>()) {
        let inst = Instance::generate_random(n, k, seed).unwrap();
        let feasible = feasible_incidences(&inst);
        let mut rng = SplitMix64::new(seed);
        let m = n * (n - 1) / 2;
        let x: Vec<f64> = (0..m).map(|_| rng.next_f64()).collect();
        let limits = EnumLimits::default();
        let mut cuts = separate_2partition(n, &x, &mut rng);
        cuts.extend(separate_weight_cover(&inst, &x));
        cuts.extend(separate_weight_bounds_exhaustive(&inst, &x, WeightBound::Lower, limits).cuts);
        cuts.extend(separate_weight_bounds_exhaustive(&inst, &x, WeightBound::Upper, limits).cuts);
        for cut in &cuts {
            prop_assert!(cut.violation_at(&x) > 0.0);
            for f in &feasible {
                prop_assert!(cut.violation_at(f) <= 1e-9, "{:?} cut violated", cut.family);
            }
        }
    }

    #[test]
    fn warm_and_cold_starts_agree(seed in any::<u64>(), extra in any::<u64>()) {
        let mut lp = random_lp(seed, 20);
        let first = solve_lp(&lp, None).unwrap();
        prop_assume!(first.status == LpStatus::Optimal);
        let mut rng = SplitMix64::new(extra);
        let coeffs: Vec<(usize, f64)> = (0..lp.ncols()).map(|j| (j, rng.uniform_f64(-1.0, 1.0))).collect();
        let act = Row::new(coeffs.clone(), Relation::Le, 0.0).activity(&first.x);
        lp.add_row(Row::new(coeffs, Relation::Le, act - rng.uniform_f64(0.0, 0.5))).unwrap();
        let warm = solve_lp(&lp, Some(&first.basis)).unwrap();
        let cold = solve_lp(&lp, None).unwrap();
        prop_assert_eq!(warm.status, cold.status);
        if cold.status == LpStatus::Optimal {
            prop_assert!(close(warm.objective, cold.objective, 1e-7), "{} vs {}", warm.objective, cold.objective);
        }
    }

    #[test]
    fn rows_satisfied_at_the_optimum_keep_the_objective(seed in any::<u64>(), extra in any::<u64>()) {
        let mut lp = random_lp(seed, 20);
        let first = solve_lp(&lp, None).unwrap();
        prop_assume!(first.status == LpStatus::Optimal);
        let mut rng = SplitMix64::new(extra);
        let rows: Vec<Row> = (0..3).map(|_| {
            let coeffs: Vec<(usize, f64)> = (0..lp.ncols()).map(|j| (j, rng.uniform_f64(-1.0, 1.0))).collect();
            let act = Row::new(coeffs.clone(), Relation::Ge, 0.0).activity(&first.x);
            Row::new(coeffs, Relation::Ge, act - rng.uniform_f64(0.0, 0.5))
        }).collect();
        lp.add_rows(rows).unwrap();
        let again = solve_lp(&lp, Some(&first.basis)).unwrap();
        prop_assert_eq!(again.status, LpStatus::Optimal);
        prop_assert!(close(again.objective, first.objective, 1e-7));
    }

    #[test]
    fn fixing_a_variable_never_improves(seed in any::<u64>(), pick in any::<u64>()) {
        let mut lp = random_lp(seed, 20);
        let first = solve_lp(&lp, None).unwrap();
        prop_assume!(first.status == LpStatus::Optimal);
        let mut rng = SplitMix64::new(pick);
        let j = rng.index(lp.ncols());
        let v = rng.uniform_f64(lp.lower()[j], lp.upper()[j]);
        lp.fix_var(j, v).unwrap();
        let fixed = solve_lp(&lp, None).unwrap();
        if fixed.status == LpStatus::Optimal {
            prop_assert!(fixed.objective >= first.objective - 1e-7 * first.objective.abs().max(1.0));
        }
    }

    #[test]
    fn instance_and_partition_files_round_trip((n, k) in n_and_k(20), seed in any::<u64>()) {
        let inst = Instance::generate_random(n, k, seed).unwrap().with_forbidden([(0, n - 1)]).unwrap();
        let back = Instance::from_toml(&inst.to_toml()).unwrap();
        prop_assert_eq!(back.to_toml(), inst.to_toml());
        let p = random_balanced(n, k, &mut SplitMix64::new(seed));
        let p = Partition::from_assignment(inst.weights(), k, p.assignment().to_vec()).unwrap();
        let eval = evaluate(&inst, &p).unwrap();
        let q = Partition::from_toml(&inst, &p.to_toml(&eval)).unwrap();
        prop_assert_eq!(q.canonical(), p.canonical());
    }
}

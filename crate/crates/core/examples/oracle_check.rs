//! Cross-check branch-and-cut against exhaustive enumeration.

use kpart::oracle::{balanced_partition_count, enumerate};
use kpart::rng::split_seed;
use kpart::{solve, Instance, SolveOptions, Strategy};

fn main() -> kpart::Result<()> {
    for i in 0..8 {
        let seed = split_seed(99, i);
        let (n, k) = [(8, 2), (9, 3), (10, 2), (12, 3)][i as usize % 4];
        let inst = Instance::generate_random(n, k, seed)?;
        let res = enumerate(&inst, |_, _| {})?;
        let rep = solve(&inst, &Strategy::s5(), &SolveOptions { seed, ..SolveOptions::default() })?;
        println!(
            "n={n:>2} k={k}  balanced {:>6}  feasible {:>6}  oracle {:>10}  S5 {:>10}  ({} nodes)",
            balanced_partition_count(n, k),
            res.feasible_count,
            res.optimum.map_or("infeasible".into(), |d| format!("{d:.4}")),
            rep.objective().map_or("infeasible".into(), |d| format!("{d:.4}")),
            rep.nodes
        );
    }
    Ok(())
}

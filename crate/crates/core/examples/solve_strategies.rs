//! Solve one instance with each of the five branch-and-cut strategies.

use kpart::{solve, Instance, SolveOptions, Strategy};

fn main() -> kpart::Result<()> {
    let inst = Instance::generate_random(15, 4, 11)?;
    println!("{:<4} {:>10} {:>12} {:>12} {:>7} {:>6} {:>8}", "", "status", "objective", "root bound", "nodes", "cuts", "time");
    for name in ["s1", "s2", "s3", "s4", "s5"] {
        let strategy = Strategy::by_name(name).unwrap();
        let opts = SolveOptions { seed: 1, time_limit: Some(60.0), ..SolveOptions::default() };
        let rep = solve(&inst, &strategy, &opts)?;
        println!(
            "{:<4} {:>10} {:>12.4} {:>12.4} {:>7} {:>6} {:>7.2}s",
            strategy.name,
            format!("{:?}", rep.status),
            rep.objective().unwrap_or(f64::NAN),
            rep.root_bound.unwrap_or(f64::NAN),
            rep.nodes,
            rep.total_cuts(),
            rep.wall_time
        );
    }
    Ok(())
}

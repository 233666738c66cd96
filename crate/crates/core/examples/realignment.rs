//! A 44-team, 8-division realignment where the two teams of each of 22
//! associations must not share a division.

use kpart::model::Model;
use kpart::{solve, Instance, SolveOptions, Strategy};

fn main() -> kpart::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/realignment44.toml");
    let inst = Instance::load(path)?;
    let strategy = Strategy::s5();
    let model = Model::build(&inst, &strategy.model_config())?;
    print!("{}", model.stats());

    let limit: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(60.0);
    let opts = SolveOptions { seed: 1, time_limit: Some(limit), progress_interval: Some(10.0), ..SolveOptions::default() };
    let rep = solve(&inst, &strategy, &opts)?;
    println!("{:?}: {:?} (bound {:?}, gap {:?}) after {} nodes", rep.status, rep.objective(), rep.best_bound, rep.gap(), rep.nodes);
    if let Some(p) = &rep.incumbent {
        for class in p.canonical() {
            println!("  {class:?}");
        }
        // Each division plays a double round robin.
        println!("total intra-division travel {:.1}", 2.0 * rep.objective().unwrap());
    }
    Ok(())
}

//! Two-stage tabu search on its own, with the improvement trace.

use kpart::tabu::{iteration_limit, run};
use kpart::Instance;

fn main() -> kpart::Result<()> {
    let inst = Instance::generate_random(30, 5, 3)?;
    let limit = iteration_limit(inst.n());
    let res = run(&inst, 42, limit);
    println!("{} iterations, last improvement at {}", res.iterations, res.last_improvement());
    for e in &res.trace {
        println!("  iter {:>6}  f = {:.4}", e.iteration, e.f);
    }
    println!("d = {:.4}, feasible = {}", res.eval.d, res.eval.is_feasible());
    for (c, class) in res.best.canonical().iter().enumerate() {
        println!("  class {c} (weight {:.3}): {class:?}", res.best.class_weight(res.best.class_of(class[0])));
    }
    Ok(())
}

//! Solve the root relaxation once and show what each separator finds.

use kpart::cuts::{
    separate_2partition, separate_weight_bounds_exhaustive, separate_weight_cover, EnumLimits, WeightBound,
};
use kpart::model::{Formulation, Model, ModelConfig, SeparationContext};
use kpart::rng::SplitMix64;
use kpart::simplex::solve_lp;
use kpart::Instance;

fn main() -> kpart::Result<()> {
    let inst = Instance::generate_random(21, 4, 7)?;
    let model = Model::build(&inst, &ModelConfig::on_demand(Formulation::F2))?;
    let lp = solve_lp(&model.lp, None)?;
    let x = &lp.x;
    let fractional = x.iter().filter(|v| (*v - v.round()).abs() > 1e-6).count();
    println!("root LP {:.4}, {fractional} fractional of {} variables", lp.objective, x.len());

    let tris = model.separate_triangles(x, SeparationContext::RootFractional);
    println!("triangle: {} violated pool rows", tris.len());
    let mut rng = SplitMix64::new(1);
    let families = [
        ("2-partition", separate_2partition(inst.n(), x, &mut rng)),
        ("weight cover", separate_weight_cover(&inst, x)),
        ("weight lower", separate_weight_bounds_exhaustive(&inst, x, WeightBound::Lower, EnumLimits::default()).cuts),
        ("weight upper", separate_weight_bounds_exhaustive(&inst, x, WeightBound::Upper, EnumLimits::default()).cuts),
    ];
    for (name, cuts) in families {
        let best = cuts.iter().map(|c| c.violation).fold(0.0, f64::max);
        println!("{name}: {} cuts, largest violation {best:.3}", cuts.len());
        if let Some(c) = cuts.first() {
            println!("    e.g. S = {:?}, T = {:?}, anchor {:?}", c.support.s, c.support.t, c.support.anchor);
        }
    }
    Ok(())
}

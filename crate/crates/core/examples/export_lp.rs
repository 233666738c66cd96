//! Write both formulations of a small instance in LP format.

use kpart::model::{Formulation, Model, ModelConfig};
use kpart::Instance;

fn main() -> kpart::Result<()> {
    let inst = Instance::generate_random(7, 2, 5)?;
    let f1 = Model::build(&inst.add_dummies()?, &ModelConfig::all_triangles(Formulation::F1))?;
    let f2 = Model::build(&inst, &ModelConfig::all_triangles(Formulation::F2))?;
    for (name, model) in [("f1.lp", &f1), ("f2.lp", &f2)] {
        let path = std::env::temp_dir().join(name);
        model.export_lp_file(&path)?;
        println!("{} -> {} columns, {} rows", path.display(), model.lp.ncols(), model.lp.nrows());
    }
    print!("{}", f2.stats());
    Ok(())
}

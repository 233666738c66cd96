//! Draw a random Euclidean instance and save it as TOML.
//!
//!     cargo run --example generate_instance -- 16 4 7 inst.toml

use kpart::Instance;

fn main() -> kpart::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let n: usize = arg(0, "16").parse().expect("n");
    let k: usize = arg(1, "4").parse().expect("k");
    let seed: u64 = arg(2, "7").parse().expect("seed");
    let inst = Instance::generate_random(n, k, seed)?;
    let sb = inst.size_bounds();
    println!("n = {n}, k = {k}: classes of {}..={} nodes, {} intra-class edges", sb.fl, sb.fu, sb.beta);
    println!("class weight window [{:.4}, {:.4}], total weight {:.4}", inst.wl(), inst.wu(), inst.total_weight());
    if let Some(path) = args.get(3) {
        inst.save(path)?;
        println!("saved {path}");
    } else {
        print!("{}", inst.to_toml());
    }
    Ok(())
}

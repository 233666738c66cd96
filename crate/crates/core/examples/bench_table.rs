//! A miniature benchmark table: two instance groups, three strategies.

use kpart::cli::{run_bench, BenchSpec};

const SPEC: &str = r#"
master_seed = 2024
time_limit = 30.0
strategies = ["S3", "S4", "S5"]

[[groups]]
n = 12
k = 3
count = 3

[[groups]]
n = 14
k = 4
count = 3
"#;

fn main() -> kpart::Result<()> {
    let spec = BenchSpec::from_toml(SPEC)?;
    let (table, _) = run_bench(&spec, 1)?;
    print!("{}", table.render_text());
    Ok(())
}

//! Commands behind the `kpart` binary, and the benchmark table builder.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use crate::bnc::{self, SolveOptions, SolveStatus, Strategy};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::model::{Formulation, Model, ModelConfig};
use crate::oracle;
use crate::rng::split_seed;
use crate::solution::{evaluate, Partition};
use crate::tabu;

#[derive(Debug, Parser)]
#[command(name = "kpart", version, about = "Balanced k-way partitioning with weight constraints")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Master seed for generation and randomized components.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Wall-clock limit in seconds.
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    /// Worker threads (branch-and-cut workers, or parallel bench cells).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Only print essential results.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulationArg {
    F1,
    F2,
}

impl From<FormulationArg> for Formulation {
    fn from(f: FormulationArg) -> Formulation {
        match f {
            FormulationArg::F1 => Formulation::F1,
            FormulationArg::F2 => Formulation::F2,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Solve an instance with branch-and-cut.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "s5")]
        strategy: String,
        /// Write the best partition here.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Append a JSON summary line to this file.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Write one line per added cut to this file.
        #[arg(long)]
        cut_log: Option<PathBuf>,
        /// Progress line interval in seconds.
        #[arg(long, default_value_t = 5.0)]
        progress: f64,
    },
    /// Run the tabu search heuristic.
    Tabu {
        instance: PathBuf,
        /// Iterations (default: the size-dependent limit).
        #[arg(long)]
        iters: Option<u64>,
        /// Write `iteration,f` improvement lines here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Enumerate all balanced partitions of a small instance.
    Oracle {
        instance: PathBuf,
        #[arg(long, default_value_t = oracle::DEFAULT_CAP)]
        cap: usize,
    },
    /// Write the full model in LP format.
    ExportLp {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "f2")]
        formulation: FormulationArg,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Evaluate a partition file against an instance.
    Evaluate { instance: PathBuf, partition: PathBuf },
    /// Run a strategy comparison described by a bench file.
    Bench {
        spec: PathBuf,
        /// Directory for `table.txt`, `table.csv` and `results.jsonl`.
        #[arg(long, short, default_value = "bench-out")]
        out_dir: PathBuf,
    },
    /// Print model statistics.
    Stats {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "f2")]
        formulation: FormulationArg,
        /// Deciles in the initial relaxation, e.g. `1,2`.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        deciles: Vec<u8>,
    },
}

/// Exit codes of `solve`.
pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_LIMIT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

macro_rules! say {
    ($g:expr, $($t:tt)*) => {
        if !$g.quiet {
            println!($($t)*);
        }
    };
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let g = &cli.global;
    match cli.command {
        Command::Gen { n, k, out } => cmd_gen(g, n, k, &out),
        Command::Solve { instance, strategy, out, results, cut_log, progress } => {
            cmd_solve(g, &instance, &strategy, out.as_deref(), results.as_deref(), cut_log.as_deref(), progress)
        }
        Command::Tabu { instance, iters, trace, out } => cmd_tabu(g, &instance, iters, trace.as_deref(), out.as_deref()),
        Command::Oracle { instance, cap } => cmd_oracle(g, &instance, cap),
        Command::ExportLp { instance, formulation, out } => cmd_export_lp(g, &instance, formulation.into(), &out),
        Command::Evaluate { instance, partition } => cmd_evaluate(&instance, &partition),
        Command::Bench { spec, out_dir } => cmd_bench(g, &spec, &out_dir),
        Command::Stats { instance, formulation, deciles } => cmd_stats(&instance, formulation.into(), deciles),
    }
}

pub fn cmd_gen(g: &GlobalArgs, n: usize, k: usize, out: &Path) -> Result<i32> {
    let inst = Instance::generate_random(n, k, g.seed)?;
    inst.save(out)?;
    say!(g, "wrote {} (n = {n}, k = {k}, wl = {:.6}, wu = {:.6})", out.display(), inst.wl(), inst.wu());
    println!(
        "necessary feasibility condition: {}",
        if inst.check_necessary_feasibility() { "holds" } else { "fails" }
    );
    Ok(0)
}

fn print_partition(p: &Partition) {
    for (c, class) in p.canonical().iter().enumerate() {
        let members: Vec<String> = class.iter().map(|v| v.to_string()).collect();
        println!("  class {c}: {}", members.join(" "));
    }
}

pub fn cmd_solve(
    g: &GlobalArgs,
    path: &Path,
    strategy: &str,
    out: Option<&Path>,
    results: Option<&Path>,
    cut_log: Option<&Path>,
    progress: f64,
) -> Result<i32> {
    let inst = Instance::load(path)?;
    let strat = Strategy::by_name(strategy).ok_or_else(|| Error::Config(format!("unknown strategy {strategy:?}")))?;
    let opts = SolveOptions {
        seed: g.seed,
        time_limit: g.time_limit,
        threads: g.threads,
        progress_interval: (!g.quiet).then_some(progress),
        record_cut_log: cut_log.is_some(),
        ..SolveOptions::default()
    };
    let rep = bnc::solve(&inst, &strat, &opts)?;
    println!("status      {:?}", rep.status);
    if let Some(reason) = &rep.infeasible_reason {
        println!("reason      {reason}");
    }
    if let Some(d) = rep.objective() {
        println!("objective   {d}");
    }
    if let Some(b) = rep.best_bound {
        println!("bound       {b}");
    }
    if let Some(gap) = rep.gap() {
        println!("gap         {:.4}%", 100.0 * gap);
    }
    say!(g, "nodes       {}", rep.nodes);
    say!(g, "time        {:.3}s", rep.wall_time);
    for (f, c) in &rep.cuts {
        say!(g, "cuts        {:<14} {c}", f.name());
    }
    if let Some(p) = &rep.incumbent {
        if !g.quiet {
            print_partition(p);
        }
        if let Some(out) = out {
            fs::write(out, p.to_toml(rep.evaluation.as_ref().unwrap()))?;
        }
    }
    if let Some(path) = results {
        let mut line = rep.summary_json();
        line["instance"] = serde_json::json!(path.display().to_string());
        line["seed"] = serde_json::json!(g.seed);
        append_line(path, &line.to_string())?;
    }
    if let Some(path) = cut_log {
        let mut text = String::from("family,violation,support,node\n");
        for e in &rep.cut_log {
            let _ = writeln!(text, "{},{},{},{}", e.family.name(), e.violation, e.support, e.node);
        }
        fs::write(path, text)?;
    }
    Ok(match rep.status {
        SolveStatus::Optimal => EXIT_OPTIMAL,
        SolveStatus::TimeLimit | SolveStatus::NodeLimit => EXIT_LIMIT,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
    })
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}

pub fn cmd_tabu(g: &GlobalArgs, path: &Path, iters: Option<u64>, trace: Option<&Path>, out: Option<&Path>) -> Result<i32> {
    let inst = Instance::load(path)?;
    let iters = iters.unwrap_or_else(|| tabu::iteration_limit(inst.n()));
    let start = std::time::Instant::now();
    let r = tabu::run(&inst, g.seed, iters);
    println!("f                 {}", r.eval.f);
    println!("d                 {}", r.eval.d);
    println!("infeasible        {}", r.eval.infeasible_classes.len());
    println!("forbidden joined  {}", r.eval.forbidden_hits);
    println!("last improvement  {}", r.last_improvement());
    say!(g, "iterations        {iters}");
    say!(g, "time              {:.3}s", start.elapsed().as_secs_f64());
    if !g.quiet {
        print_partition(&r.best);
    }
    if let Some(t) = trace {
        let mut text = String::from("iteration,f\n");
        for e in &r.trace {
            let _ = writeln!(text, "{},{}", e.iteration, e.f);
        }
        fs::write(t, text)?;
    }
    if let Some(o) = out {
        fs::write(o, r.best.to_toml(&r.eval))?;
    }
    Ok(0)
}

pub fn cmd_oracle(g: &GlobalArgs, path: &Path, cap: usize) -> Result<i32> {
    let inst = Instance::load(path)?;
    let res = oracle::enumerate_with(&inst, oracle::OracleOptions { cap, ..Default::default() }, |_, _| {})?;
    println!("enumerated  {}", res.enumerated_count);
    println!("feasible    {}", res.feasible_count);
    match res.optimum {
        Some(d) => {
            println!("optimum     {d}");
            println!("optimal partitions  {}", res.optimal.len());
            if !g.quiet {
                print_partition(&res.optimal[0]);
            }
            Ok(0)
        }
        None => {
            println!("optimum     infeasible");
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn build_for(inst: &Instance, formulation: Formulation, deciles: Vec<u8>) -> Result<Model> {
    let work = if formulation == Formulation::F1 && !inst.n().is_multiple_of(inst.k()) { inst.add_dummies()? } else { inst.clone() };
    let cfg = ModelConfig { initial_deciles: deciles, ..ModelConfig::all_triangles(formulation) };
    Model::build(&work, &cfg)
}

pub fn cmd_export_lp(g: &GlobalArgs, path: &Path, formulation: Formulation, out: &Path) -> Result<i32> {
    let inst = Instance::load(path)?;
    let model = build_for(&inst, formulation, (1..=10).collect())?;
    model.export_lp_file(out)?;
    say!(g, "wrote {} ({} columns, {} rows)", out.display(), model.lp.ncols(), model.lp.nrows());
    Ok(0)
}

pub fn cmd_evaluate(inst_path: &Path, part_path: &Path) -> Result<i32> {
    let inst = Instance::load(inst_path)?;
    let p = Partition::load(&inst, part_path)?;
    let e = evaluate(&inst, &p)?;
    println!("d                   {}", e.d);
    println!("double round robin  {}", 2.0 * e.d);
    println!("f                   {}", e.f);
    println!("infeasible classes  {:?}", e.infeasible_classes);
    println!("forbidden joined    {}", e.forbidden_hits);
    for c in 0..p.k() {
        println!("  class {c} weight {:.6}", p.class_weight(c));
    }
    println!("feasible            {}", e.is_feasible());
    Ok(if e.is_feasible() { 0 } else { 1 })
}

pub fn cmd_stats(path: &Path, formulation: Formulation, deciles: Vec<u8>) -> Result<i32> {
    let inst = Instance::load(path)?;
    let model = build_for(&inst, formulation, deciles)?;
    print!("{}", model.stats());
    Ok(0)
}

/// Bench file contents.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub master_seed: u64,
    /// Seconds per (instance, strategy) cell.
    pub time_limit: f64,
    pub strategies: Vec<String>,
    /// Parallel cells; the `--threads` flag overrides it.
    #[serde(default)]
    pub threads: Option<usize>,
    pub groups: Vec<BenchGroup>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchGroup {
    pub n: usize,
    pub k: usize,
    pub count: usize,
}

impl BenchSpec {
    pub fn from_toml(text: &str) -> Result<BenchSpec> {
        let spec: BenchSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for s in &spec.strategies {
            if Strategy::by_name(s).is_none() {
                return Err(Error::Config(format!("unknown strategy {s:?}")));
            }
        }
        Ok(spec)
    }

    /// `(instance id, n, k, instance seed)` in table order.
    pub fn instances(&self) -> Vec<(usize, usize, usize, u64)> {
        let mut out = Vec::new();
        for g in &self.groups {
            for _ in 0..g.count {
                let id = out.len() + 1;
                out.push((id, g.n, g.k, split_seed(self.master_seed, id as u64)));
            }
        }
        out
    }
}

/// Outcome of one (instance, strategy) run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub status: Option<SolveStatus>,
    pub objective: Option<f64>,
    pub nodes: u64,
    pub time: f64,
    pub gap: Option<f64>,
    pub error: Option<String>,
}

impl BenchCell {
    pub fn solved(&self) -> bool {
        self.status == Some(SolveStatus::Optimal) || self.status == Some(SolveStatus::Infeasible)
    }

    pub fn from_error(e: &Error) -> BenchCell {
        BenchCell { status: None, objective: None, nodes: 0, time: 0.0, gap: None, error: Some(e.to_string()) }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub instance: usize,
    pub n: usize,
    pub k: usize,
    pub cells: Vec<BenchCell>,
}

impl BenchRow {
    /// Optimal value when some strategy proved it.
    pub fn optimum(&self) -> Option<f64> {
        self.cells.iter().find(|c| c.status == Some(SolveStatus::Optimal)).and_then(|c| c.objective)
    }
}

#[derive(Debug, Clone)]
pub struct BenchTable {
    pub strategies: Vec<String>,
    pub rows: Vec<BenchRow>,
}

/// Column averages of nodes and time.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchAverages {
    /// Averaged only over instances every strategy solved.
    pub dagger: bool,
    pub instances: usize,
    pub nodes: Vec<f64>,
    pub time: Vec<f64>,
}

impl BenchTable {
    pub fn averages(&self) -> BenchAverages {
        let all_solved = |r: &BenchRow| r.cells.iter().all(BenchCell::solved);
        let dagger = !self.rows.iter().all(all_solved);
        let used: Vec<&BenchRow> = self.rows.iter().filter(|r| all_solved(r)).collect();
        let m = used.len().max(1) as f64;
        let ns = self.strategies.len();
        BenchAverages {
            dagger,
            instances: used.len(),
            nodes: (0..ns).map(|s| used.iter().map(|r| r.cells[s].nodes as f64).sum::<f64>() / m).collect(),
            time: (0..ns).map(|s| used.iter().map(|r| r.cells[s].time).sum::<f64>() / m).collect(),
        }
    }

    /// Cell strings shared by the text and CSV renderings:
    /// header, one line per instance, the average line.
    fn grid(&self) -> Vec<Vec<String>> {
        let mut header = vec!["inst".to_string(), "n".into(), "k".into(), "opt".into()];
        for s in &self.strategies {
            header.push(format!("{s} nodes"));
            header.push(format!("{s} time"));
        }
        let mut grid = vec![header];
        for r in &self.rows {
            let mut line = vec![
                r.instance.to_string(),
                r.n.to_string(),
                r.k.to_string(),
                r.optimum().map_or("-".into(), |d| format!("{d:.1}")),
            ];
            for c in &r.cells {
                match (&c.error, c.status) {
                    (Some(_), _) => line.extend(["err".to_string(), "err".to_string()]),
                    (None, Some(SolveStatus::Optimal)) | (None, Some(SolveStatus::Infeasible)) => {
                        line.push(c.nodes.to_string());
                        line.push(format!("{:.2}", c.time));
                    }
                    _ => {
                        line.push(c.gap.map_or("gap -".into(), |g| format!("gap {:.2}%", 100.0 * g)));
                        line.push("-".into());
                    }
                }
            }
            grid.push(line);
        }
        let avg = self.averages();
        let best_nodes = avg.nodes.iter().copied().fold(f64::INFINITY, f64::min);
        let best_time = avg.time.iter().copied().fold(f64::INFINITY, f64::min);
        let mark = |v: f64, best: f64| if v <= best + 1e-12 && avg.instances > 0 { "*" } else { "" };
        let mut line = vec![if avg.dagger { "avg\u{2020}".to_string() } else { "avg".to_string() }, String::new(), String::new(), String::new()];
        for s in 0..self.strategies.len() {
            line.push(format!("{:.1}{}", avg.nodes[s], mark(avg.nodes[s], best_nodes)));
            line.push(format!("{:.2}{}", avg.time[s], mark(avg.time[s], best_time)));
        }
        grid.push(line);
        grid
    }

    pub fn render_text(&self) -> String {
        let grid = self.grid();
        let cols = grid[0].len();
        let width: Vec<usize> = (0..cols).map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (i, row) in grid.iter().enumerate() {
            let cells: Vec<String> = row.iter().zip(&width).map(|(s, w)| format!("{s:>w$}")).collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if i == 0 || i == grid.len() - 2 {
                out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
                out.push('\n');
            }
        }
        let avg = self.averages();
        if avg.dagger {
            let _ = writeln!(out, "\u{2020} averaged over the {} instances solved by every strategy", avg.instances);
        }
        out.push_str("* best average\n");
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::new();
        for row in self.grid() {
            let cells: Vec<String> = row
                .iter()
                .map(|s| if s.contains(',') || s.contains('"') { format!("\"{}\"", s.replace('"', "\"\"")) } else { s.clone() })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Runs every (instance, strategy) cell, `parallel` at a time.
pub fn run_bench(spec: &BenchSpec, parallel: usize) -> Result<(BenchTable, Vec<serde_json::Value>)> {
    let instances = spec.instances();
    let strategies: Vec<Strategy> = spec.strategies.iter().map(|s| Strategy::by_name(s).expect("validated")).collect();
    let cells: Vec<(usize, usize)> = (0..instances.len()).flat_map(|i| (0..strategies.len()).map(move |s| (i, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<(BenchCell, Option<serde_json::Value>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, s)| {
                let (id, n, k, seed) = instances[i];
                let outcome = Instance::generate_random(n, k, seed).and_then(|inst| {
                    let opts = SolveOptions {
                        seed: split_seed(seed, 1000),
                        time_limit: Some(spec.time_limit),
                        ..SolveOptions::default()
                    };
                    bnc::solve(&inst, &strategies[s], &opts)
                });
                match outcome {
                    Ok(rep) => {
                        let mut json = rep.summary_json();
                        json["instance"] = serde_json::json!(id);
                        json["n"] = serde_json::json!(n);
                        json["k"] = serde_json::json!(k);
                        let cell = BenchCell {
                            status: Some(rep.status),
                            objective: rep.objective(),
                            nodes: rep.nodes,
                            time: rep.wall_time,
                            gap: rep.gap(),
                            error: None,
                        };
                        (cell, Some(json))
                    }
                    Err(e) => (BenchCell::from_error(&e), None),
                }
            })
            .collect()
    });
    let mut rows: Vec<BenchRow> = instances.iter().map(|&(id, n, k, _)| BenchRow { instance: id, n, k, cells: Vec::new() }).collect();
    let mut json = Vec::new();
    for ((i, _), (cell, j)) in cells.iter().zip(results) {
        rows[*i].cells.push(cell);
        json.extend(j);
    }
    Ok((BenchTable { strategies: spec.strategies.iter().map(|s| s.to_uppercase()).collect(), rows }, json))
}

pub fn cmd_bench(g: &GlobalArgs, spec_path: &Path, out_dir: &Path) -> Result<i32> {
    let mut spec = BenchSpec::from_toml(&fs::read_to_string(spec_path)?)?;
    if let Some(t) = g.time_limit {
        spec.time_limit = t;
    }
    let parallel = if g.threads > 1 { g.threads } else { spec.threads.unwrap_or(1) };
    let (table, json) = run_bench(&spec, parallel)?;
    fs::create_dir_all(out_dir)?;
    let text = table.render_text();
    fs::write(out_dir.join("table.txt"), &text)?;
    fs::write(out_dir.join("table.csv"), table.render_csv())?;
    let lines: Vec<String> = json.iter().map(|j| j.to_string()).collect();
    fs::write(out_dir.join("results.jsonl"), lines.join("\n") + "\n")?;
    if !g.quiet {
        print!("{text}");
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(status: SolveStatus, nodes: u64, time: f64) -> BenchCell {
        BenchCell { status: Some(status), objective: Some(10.0), nodes, time, gap: Some(0.05), error: None }
    }

    #[test]
    fn dagger_average_skips_unsolved_rows() {
        let table = BenchTable {
            strategies: vec!["S3".into(), "S4".into()],
            rows: vec![
                BenchRow { instance: 1, n: 10, k: 3, cells: vec![cell(SolveStatus::Optimal, 10, 1.0), cell(SolveStatus::Optimal, 4, 0.5)] },
                BenchRow { instance: 2, n: 10, k: 3, cells: vec![cell(SolveStatus::TimeLimit, 99, 9.0), cell(SolveStatus::Optimal, 6, 0.7)] },
            ],
        };
        let avg = table.averages();
        assert!(avg.dagger);
        assert_eq!(avg.instances, 1);
        assert_eq!(avg.nodes, vec![10.0, 4.0]);
        let text = table.render_text();
        assert!(text.contains("gap 5.00%"));
        assert!(text.contains("4.0*"));
        let csv = table.render_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.contains("gap 5.00%"));
    }

    #[test]
    fn bench_spec_parsing() {
        let spec = BenchSpec::from_toml(
            "master_seed = 3\ntime_limit = 1.0\nstrategies = [\"s4\", \"s5\"]\n[[groups]]\nn = 8\nk = 2\ncount = 2\n",
        )
        .unwrap();
        let ids = spec.instances();
        assert_eq!(ids.len(), 2);
        assert_ne!(ids[0].3, ids[1].3);
        assert!(BenchSpec::from_toml("master_seed = 3\ntime_limit = 1.0\nstrategies = [\"s9\"]\ngroups = []\n").is_err());
    }
}

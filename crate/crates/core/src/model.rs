//! Integer formulations over edge variables.
//!
//! `x[{i,j}] = 1` when `i` and `j` share a class. Both formulations minimize
//! `sum d_ij x_ij` subject to triangle inequalities, per-node cardinality
//! rows and per-node weight rows. [`Formulation::F1`] expects an instance
//! completed with dummy nodes (so `k | n`); [`Formulation::F2`] works on the
//! original graph and adds the single row `sum x = beta(n, k)`.
//!
//! Variables are fixed to zero for dummy pairs, forbidden pairs and pairs
//! whose joint weight already exceeds `wu`.
//!
//! Triangle inequalities live in a [`TriPool`], ordered by the distance sum
//! of their two positive terms and split into ten deciles. Only configured
//! deciles enter the initial relaxation; the rest are separated on demand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::cuts::CutFamily;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::simplex::{LinearProgram, Relation, Row};

/// Column of the pair `{i, j}` among `n (n - 1) / 2` columns in
/// lexicographic order.
#[inline]
pub fn edge_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(j < n && i != j);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

pub fn edge_count(n: usize) -> usize {
    n * (n - 1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct FixReasons {
    pub dummy_pair: bool,
    pub forbidden: bool,
    pub weight_overflow: bool,
}

impl FixReasons {
    pub fn any(&self) -> bool {
        self.dummy_pair || self.forbidden || self.weight_overflow
    }
}

/// Bijection between node pairs and columns, with zero-fixings.
#[derive(Debug, Clone)]
pub struct EdgeVarMap {
    n: usize,
    pairs: Vec<(usize, usize)>,
    fixed: Vec<FixReasons>,
}

impl EdgeVarMap {
    pub fn new(inst: &Instance) -> EdgeVarMap {
        let n = inst.n();
        let mut pairs = Vec::with_capacity(edge_count(n));
        let mut fixed = Vec::with_capacity(edge_count(n));
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
                let both_dummy = inst.is_dummy(i) && inst.is_dummy(j);
                fixed.push(FixReasons {
                    dummy_pair: both_dummy,
                    forbidden: !both_dummy && inst.is_forbidden(i, j),
                    weight_overflow: inst.weight(i) + inst.weight(j) > inst.wu(),
                });
            }
        }
        EdgeVarMap { n, pairs, fixed }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        edge_index(self.n, i, j)
    }

    pub fn pair(&self, col: usize) -> (usize, usize) {
        self.pairs[col]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn reasons(&self, col: usize) -> FixReasons {
        self.fixed[col]
    }

    pub fn is_fixed(&self, col: usize) -> bool {
        self.fixed[col].any()
    }

    pub fn fixed_count(&self) -> usize {
        self.fixed.iter().filter(|r| r.any()).count()
    }

    pub fn active_count(&self) -> usize {
        self.len() - self.fixed_count()
    }

    pub fn var_name(&self, col: usize) -> String {
        let (i, j) = self.pairs[col];
        format!("x_{i}_{j}")
    }
}

/// The three triangle inequalities of a triple `i < j < l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TriKind {
    /// `x_ij + x_jl - x_il <= 1`
    Apex,
    /// `x_ij - x_jl + x_il <= 1`
    Left,
    /// `-x_ij + x_jl + x_il <= 1`
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub i: u32,
    pub j: u32,
    pub l: u32,
    pub kind: TriKind,
    /// Distance sum of the two positive terms.
    pub key: f64,
    /// 1-based decile.
    pub decile: u8,
    /// Implied by a zero-fixing on one of the positive terms.
    pub redundant: bool,
}

impl Triangle {
    /// `[(col, coeff); 3]` with the negative term last.
    pub fn terms(&self, n: usize) -> [(usize, f64); 3] {
        let (i, j, l) = (self.i as usize, self.j as usize, self.l as usize);
        let ij = edge_index(n, i, j);
        let jl = edge_index(n, j, l);
        let il = edge_index(n, i, l);
        match self.kind {
            TriKind::Apex => [(ij, 1.0), (jl, 1.0), (il, -1.0)],
            TriKind::Left => [(ij, 1.0), (il, 1.0), (jl, -1.0)],
            TriKind::Right => [(jl, 1.0), (il, 1.0), (ij, -1.0)],
        }
    }

    pub fn violation(&self, n: usize, x: &[f64]) -> f64 {
        self.terms(n).iter().map(|&(c, a)| a * x[c]).sum::<f64>() - 1.0
    }

    pub fn row(&self, n: usize) -> Row {
        Row::new(self.terms(n).to_vec(), Relation::Le, 1.0)
    }

    pub fn name(&self) -> String {
        let tag = match self.kind {
            TriKind::Apex => "a",
            TriKind::Left => "b",
            TriKind::Right => "c",
        };
        format!("tri_{}_{}_{}_{tag}", self.i, self.j, self.l)
    }
}

/// All `3 C(n,3)` triangle inequalities sorted by key (ties by `i, j, l,
/// kind`), split into ten deciles whose sizes differ by at most one.
#[derive(Debug, Clone)]
pub struct TriPool {
    n: usize,
    tris: Vec<Triangle>,
    /// `tris[starts[d]..starts[d + 1]]` is decile `d + 1`.
    starts: [usize; 11],
}

impl TriPool {
    pub fn new(inst: &Instance, vars: &EdgeVarMap) -> TriPool {
        let n = inst.n();
        let mut tris = Vec::with_capacity(n * n.saturating_sub(1) * n.saturating_sub(2) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                for l in (j + 1)..n {
                    let (dij, djl, dil) = (inst.dist(i, j), inst.dist(j, l), inst.dist(i, l));
                    for (kind, key) in [(TriKind::Apex, dij + djl), (TriKind::Left, dij + dil), (TriKind::Right, djl + dil)] {
                        let mut t = Triangle {
                            i: i as u32,
                            j: j as u32,
                            l: l as u32,
                            kind,
                            key,
                            decile: 0,
                            redundant: false,
                        };
                        t.redundant = t.terms(n)[..2].iter().any(|&(c, _)| vars.is_fixed(c));
                        tris.push(t);
                    }
                }
            }
        }
        tris.sort_by(|a, b| {
            a.key
                .total_cmp(&b.key)
                .then((a.i, a.j, a.l, a.kind).cmp(&(b.i, b.j, b.l, b.kind)))
        });
        let total = tris.len();
        let (base, extra) = (total / 10, total % 10);
        let mut starts = [0usize; 11];
        for d in 0..10 {
            starts[d + 1] = starts[d] + base + usize::from(d < extra);
        }
        for d in 0..10 {
            for t in &mut tris[starts[d]..starts[d + 1]] {
                t.decile = (d + 1) as u8;
            }
        }
        TriPool { n, tris, starts }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Triangle {
        &self.tris[idx]
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.tris
    }

    /// Pool indices of decile `d` (1-based).
    pub fn decile_range(&self, d: usize) -> std::ops::Range<usize> {
        assert!((1..=10).contains(&d));
        self.starts[d - 1]..self.starts[d]
    }

    pub fn decile_sizes(&self) -> [usize; 10] {
        std::array::from_fn(|d| self.starts[d + 1] - self.starts[d])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Formulation {
    /// Dummy-completed equi-partition model.
    F1,
    /// Original graph plus the `beta` equation.
    F2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub formulation: Formulation,
    /// Deciles (1..=10) placed in the initial relaxation.
    pub initial_deciles: Vec<u8>,
    /// Minimum violation for a cut at a fractional point (inclusive).
    pub cut_violation_threshold: f64,
    pub fractional_decile_limit_root: u8,
    pub fractional_decile_limit_tree: u8,
}

impl ModelConfig {
    pub fn all_triangles(formulation: Formulation) -> ModelConfig {
        ModelConfig {
            formulation,
            initial_deciles: (1..=10).collect(),
            cut_violation_threshold: 0.1,
            fractional_decile_limit_root: 10,
            fractional_decile_limit_tree: 7,
        }
    }

    /// Only the two cheapest deciles up front.
    pub fn on_demand(formulation: Formulation) -> ModelConfig {
        ModelConfig { initial_deciles: vec![1, 2], ..ModelConfig::all_triangles(formulation) }
    }

    pub fn is_initial(&self, decile: u8) -> bool {
        self.initial_deciles.contains(&decile)
    }

    fn validate(&self) -> Result<()> {
        if self.cut_violation_threshold <= 0.0 {
            return Err(Error::Config("cut violation threshold must be positive".into()));
        }
        if self.initial_deciles.iter().any(|d| !(1..=10).contains(d))
            || !(1..=10).contains(&self.fractional_decile_limit_root)
            || !(1..=10).contains(&self.fractional_decile_limit_tree)
        {
            return Err(Error::Config("deciles are numbered 1 to 10".into()));
        }
        Ok(())
    }
}

/// What a model row stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowKind {
    CardinalityLower(usize),
    CardinalityUpper(usize),
    CardinalityEq(usize),
    WeightLower(usize),
    WeightUpper(usize),
    Beta,
    Triangle(usize),
    Cut(CutFamily),
}

impl RowKind {
    pub fn family_name(&self) -> &'static str {
        match self {
            RowKind::CardinalityLower(_) | RowKind::CardinalityUpper(_) | RowKind::CardinalityEq(_) => "cardinality",
            RowKind::WeightLower(_) | RowKind::WeightUpper(_) => "weight",
            RowKind::Beta => "beta",
            RowKind::Triangle(_) => "triangle",
            RowKind::Cut(f) => f.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationContext {
    RootFractional,
    TreeFractional,
    Integer,
}

/// A built formulation: the LP relaxation, the variable map and the
/// triangle pool, plus which pool entries are already rows.
#[derive(Debug, Clone)]
pub struct Model {
    pub inst: Instance,
    pub cfg: ModelConfig,
    pub lp: LinearProgram,
    pub vars: EdgeVarMap,
    pub pool: TriPool,
    pub row_kinds: Vec<RowKind>,
    /// Per pool entry: already a row of `lp`.
    pub tri_in_lp: Vec<bool>,
}

impl Model {
    /// Builds the relaxation of `inst` (already dummy-completed for F1).
    pub fn build(inst: &Instance, cfg: &ModelConfig) -> Result<Model> {
        cfg.validate()?;
        if !inst.check_necessary_feasibility() {
            return Err(Error::InvalidInstance(
                "necessary weight/size condition fails: no balanced weight-feasible partition exists".into(),
            ));
        }
        let n = inst.n();
        let k = inst.k();
        if cfg.formulation == Formulation::F1 && !n.is_multiple_of(k) {
            return Err(Error::Config(format!(
                "F1 needs k | n; add dummy nodes first (n = {n}, k = {k})"
            )));
        }
        let vars = EdgeVarMap::new(inst);
        let ncols = vars.len();
        let objective: Vec<f64> = vars.pairs().iter().map(|&(i, j)| inst.dist(i, j)).collect();
        let upper: Vec<f64> = (0..ncols).map(|c| if vars.is_fixed(c) { 0.0 } else { 1.0 }).collect();
        let mut lp = LinearProgram::new(objective, vec![0.0; ncols], upper)?;
        let mut row_kinds = Vec::new();
        let sb = inst.size_bounds();

        for i in 0..n {
            let coeffs: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (vars.index(i, j), 1.0)).collect();
            if sb.r == 0 {
                lp.add_row(Row::new(coeffs, Relation::Eq, (sb.fl - 1) as f64))?;
                row_kinds.push(RowKind::CardinalityEq(i));
            } else {
                lp.add_row(Row::new(coeffs.clone(), Relation::Ge, (sb.fl - 1) as f64))?;
                row_kinds.push(RowKind::CardinalityLower(i));
                lp.add_row(Row::new(coeffs, Relation::Le, (sb.fu - 1) as f64))?;
                row_kinds.push(RowKind::CardinalityUpper(i));
            }
        }
        for i in 0..n {
            let coeffs: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i && inst.weight(j) != 0.0)
                .map(|j| (vars.index(i, j), inst.weight(j)))
                .collect();
            lp.add_row(Row::new(coeffs.clone(), Relation::Ge, inst.wl() - inst.weight(i)))?;
            row_kinds.push(RowKind::WeightLower(i));
            lp.add_row(Row::new(coeffs, Relation::Le, inst.wu() - inst.weight(i)))?;
            row_kinds.push(RowKind::WeightUpper(i));
        }
        if cfg.formulation == Formulation::F2 {
            lp.add_row(Row::new((0..ncols).map(|c| (c, 1.0)).collect(), Relation::Eq, sb.beta as f64))?;
            row_kinds.push(RowKind::Beta);
        }

        let pool = TriPool::new(inst, &vars);
        let mut tri_in_lp = vec![false; pool.len()];
        for (idx, t) in pool.triangles().iter().enumerate() {
            if !t.redundant && cfg.is_initial(t.decile) {
                lp.add_row(t.row(n))?;
                row_kinds.push(RowKind::Triangle(idx));
                tri_in_lp[idx] = true;
            }
        }
        Ok(Model { inst: inst.clone(), cfg: cfg.clone(), lp, vars, pool, row_kinds, tri_in_lp })
    }

    /// Appends pool entry `idx` as a row.
    pub fn add_triangle(&mut self, idx: usize) -> Result<usize> {
        let row = self.lp.add_row(self.pool.get(idx).row(self.inst.n()))?;
        self.row_kinds.push(RowKind::Triangle(idx));
        self.tri_in_lp[idx] = true;
        Ok(row)
    }

    pub fn add_cut_row(&mut self, family: CutFamily, row: Row) -> Result<usize> {
        let r = self.lp.add_row(row)?;
        self.row_kinds.push(RowKind::Cut(family));
        Ok(r)
    }

    pub fn separate_triangles(&self, x: &[f64], ctx: SeparationContext) -> Vec<(usize, f64)> {
        separate_triangles(&self.pool, &self.cfg, x, ctx, &self.tri_in_lp)
    }

    pub fn stats(&self) -> ModelStats {
        let mut rows: BTreeMap<String, usize> = BTreeMap::new();
        for kind in &self.row_kinds {
            *rows.entry(kind.family_name().to_string()).or_default() += 1;
        }
        let mut fixed: BTreeMap<String, usize> = BTreeMap::new();
        for c in 0..self.vars.len() {
            let r = self.vars.reasons(c);
            for (flag, name) in [(r.dummy_pair, "dummy_pair"), (r.forbidden, "forbidden"), (r.weight_overflow, "weight_overflow")] {
                if flag {
                    *fixed.entry(name.to_string()).or_default() += 1;
                }
            }
        }
        let tris = self.pool.triangles();
        let in_lp_by_decile: Vec<usize> = (1..=10)
            .map(|d| self.pool.decile_range(d).filter(|&t| self.tri_in_lp[t]).count())
            .collect();
        ModelStats {
            n: self.inst.n(),
            k: self.inst.k(),
            dummies: self.inst.dummy_count(),
            formulation: self.cfg.formulation,
            columns: self.vars.len(),
            active_columns: self.vars.active_count(),
            fixed_by_reason: fixed,
            rows: self.lp.nrows(),
            rows_by_family: rows,
            triangles_total: tris.len(),
            triangles_redundant: tris.iter().filter(|t| t.redundant).count(),
            triangle_decile_sizes: self.pool.decile_sizes().to_vec(),
            triangles_in_lp_by_decile: in_lp_by_decile,
        }
    }

    /// Row names in LP-file order.
    pub fn row_name(&self, r: usize) -> String {
        match self.row_kinds[r] {
            RowKind::CardinalityLower(i) => format!("card_lo_{i}"),
            RowKind::CardinalityUpper(i) => format!("card_hi_{i}"),
            RowKind::CardinalityEq(i) => format!("card_eq_{i}"),
            RowKind::WeightLower(i) => format!("w_lo_{i}"),
            RowKind::WeightUpper(i) => format!("w_hi_{i}"),
            RowKind::Beta => "beta".to_string(),
            RowKind::Triangle(t) => self.pool.get(t).name(),
            RowKind::Cut(f) => format!("{}_{r}", f.name()),
        }
    }

    /// A copy in which every non-redundant pool entry is a row.
    pub fn materialize_all(&self) -> Result<Model> {
        let mut full = self.clone();
        for idx in 0..full.pool.len() {
            if !full.tri_in_lp[idx] && !full.pool.get(idx).redundant {
                full.add_triangle(idx)?;
            }
        }
        Ok(full)
    }

    /// Text of the model in CPLEX LP format, all triangle rows included.
    pub fn to_lp_string(&self) -> Result<String> {
        let full = self.materialize_all()?;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "\\ formulation {:?}, n = {}, k = {}, wl = {}, wu = {}",
            full.cfg.formulation,
            full.inst.n(),
            full.inst.k(),
            full.inst.wl(),
            full.inst.wu()
        );
        out.push_str("Minimize\n");
        let obj: Vec<(usize, f64)> = full.lp.objective().iter().copied().enumerate().collect();
        write_expr(&mut out, " obj:", &obj, &full.vars);
        out.push('\n');
        out.push_str("Subject To\n");
        for (r, row) in full.lp.rows().iter().enumerate() {
            write_expr(&mut out, &format!(" {}:", full.row_name(r)), &row.coeffs, &full.vars);
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " {rel} {}", row.rhs);
        }
        out.push_str("Bounds\n");
        for c in 0..full.vars.len() {
            let name = full.vars.var_name(c);
            let (lo, hi) = (full.lp.lower()[c], full.lp.upper()[c]);
            if lo == hi {
                let _ = writeln!(out, " {name} = {lo}");
            } else {
                let _ = writeln!(out, " {lo} <= {name} <= {hi}");
            }
        }
        out.push_str("Binaries\n");
        for c in 0..full.vars.len() {
            let _ = writeln!(out, " {}", full.vars.var_name(c));
        }
        out.push_str("End\n");
        Ok(out)
    }

    pub fn export_lp_file(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_lp_string()?)?;
        Ok(())
    }
}

/// Writes `prefix t1 t2 ...`, wrapping long expressions.
fn write_expr(out: &mut String, prefix: &str, terms: &[(usize, f64)], vars: &EdgeVarMap) {
    out.push_str(prefix);
    let mut line_len = prefix.len();
    for (k, &(c, a)) in terms.iter().enumerate() {
        let sign = if a < 0.0 { "-" } else { "+" };
        let term = if k == 0 && a >= 0.0 {
            format!(" {} {}", a, vars.var_name(c))
        } else {
            format!(" {sign} {} {}", a.abs(), vars.var_name(c))
        };
        if line_len + term.len() > 200 {
            out.push_str("\n   ");
            line_len = 3;
        }
        line_len += term.len();
        out.push_str(&term);
    }
}

/// Violated pool entries not yet in the LP, as `(pool index, violation)`.
///
/// At integer points every on-demand decile is checked and any violation
/// above `1e-6` counts. At fractional points deciles up to the root/tree
/// limit are checked and the violation must reach the configured threshold.
pub fn separate_triangles(
    pool: &TriPool,
    cfg: &ModelConfig,
    x: &[f64],
    ctx: SeparationContext,
    in_lp: &[bool],
) -> Vec<(usize, f64)> {
    let (max_decile, threshold) = match ctx {
        SeparationContext::Integer => (10, 1e-6),
        SeparationContext::RootFractional => (cfg.fractional_decile_limit_root, cfg.cut_violation_threshold - 1e-12),
        SeparationContext::TreeFractional => (cfg.fractional_decile_limit_tree, cfg.cut_violation_threshold - 1e-12),
    };
    let n = pool.n();
    let mut out = Vec::new();
    for d in 1..=max_decile {
        if cfg.is_initial(d) {
            continue;
        }
        for idx in pool.decile_range(d as usize) {
            let t = pool.get(idx);
            if t.redundant || in_lp[idx] {
                continue;
            }
            let v = t.violation(n, x);
            if v >= threshold {
                out.push((idx, v));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelStats {
    pub n: usize,
    pub k: usize,
    pub dummies: usize,
    pub formulation: Formulation,
    pub columns: usize,
    pub active_columns: usize,
    pub fixed_by_reason: BTreeMap<String, usize>,
    pub rows: usize,
    pub rows_by_family: BTreeMap<String, usize>,
    pub triangles_total: usize,
    pub triangles_redundant: usize,
    pub triangle_decile_sizes: Vec<usize>,
    pub triangles_in_lp_by_decile: Vec<usize>,
}

impl std::fmt::Display for ModelStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "formulation      {:?}", self.formulation)?;
        writeln!(f, "nodes            {} (k = {}, dummies = {})", self.n, self.k, self.dummies)?;
        writeln!(f, "columns          {} ({} active)", self.columns, self.active_columns)?;
        for (reason, count) in &self.fixed_by_reason {
            writeln!(f, "  fixed {reason:<16} {count}")?;
        }
        writeln!(f, "rows             {}", self.rows)?;
        for (family, count) in &self.rows_by_family {
            writeln!(f, "  {family:<22} {count}")?;
        }
        writeln!(f, "triangle pool    {} ({} redundant)", self.triangles_total, self.triangles_redundant)?;
        for (d, (size, used)) in self.triangle_decile_sizes.iter().zip(&self.triangles_in_lp_by_decile).enumerate() {
            writeln!(f, "  decile {:>2}  size {size:>7}  in lp {used:>7}", d + 1)?;
        }
        Ok(())
    }
}

/// Parsed contents of an LP file written by [`Model::to_lp_string`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpFile {
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<(String, Vec<(String, f64)>, Relation, f64)>,
    pub bounds: Vec<(String, f64, f64)>,
    pub binaries: Vec<String>,
}

/// Reader for the LP-format subset this crate writes.
pub fn parse_lp_file(text: &str) -> Result<LpFile> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Objective,
        Constraints,
        Bounds,
        Binaries,
    }
    let perr = |m: String| Error::Parse(m);
    let mut section = Section::None;
    let mut obj_tokens: Vec<String> = Vec::new();
    let mut con_tokens: Vec<String> = Vec::new();
    let mut bounds = Vec::new();
    let mut binaries = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "minimize" => {
                section = Section::Objective;
                continue;
            }
            "subject to" => {
                section = Section::Constraints;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "binaries" => {
                section = Section::Binaries;
                continue;
            }
            "end" => break,
            _ => {}
        }
        let toks = line.split_whitespace().map(str::to_string);
        match section {
            Section::Objective => obj_tokens.extend(toks),
            Section::Constraints => con_tokens.extend(toks),
            Section::Bounds => {
                let t: Vec<&str> = line.split_whitespace().collect();
                let num = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("bad number {s}: {e}")));
                match t.as_slice() {
                    [name, "=", v] => {
                        let v = num(v)?;
                        bounds.push((name.to_string(), v, v));
                    }
                    [lo, "<=", name, "<=", hi] => bounds.push((name.to_string(), num(lo)?, num(hi)?)),
                    _ => return Err(perr(format!("unsupported bound line: {line}"))),
                }
            }
            Section::Binaries => binaries.extend(toks),
            Section::None => return Err(perr(format!("text before the objective: {line}"))),
        }
    }

    fn parse_terms(tokens: &[String]) -> Result<Vec<(String, f64)>> {
        let mut terms = Vec::new();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        for t in tokens {
            match t.as_str() {
                "+" => sign = 1.0,
                "-" => sign = -1.0,
                s => {
                    if let Ok(v) = s.parse::<f64>() {
                        coef = Some(v);
                    } else {
                        terms.push((s.to_string(), sign * coef.take().unwrap_or(1.0)));
                        sign = 1.0;
                    }
                }
            }
        }
        Ok(terms)
    }

    let objective = match obj_tokens.split_first() {
        Some((label, rest)) if label.ends_with(':') => parse_terms(rest)?,
        Some(_) => parse_terms(&obj_tokens)?,
        None => Vec::new(),
    };

    let mut rows = Vec::new();
    let mut cur: Vec<String> = Vec::new();
    let mut iter = con_tokens.into_iter();
    while let Some(tok) = iter.next() {
        let rel = match tok.as_str() {
            "<=" => Some(Relation::Le),
            ">=" => Some(Relation::Ge),
            "=" => Some(Relation::Eq),
            _ => None,
        };
        match rel {
            Some(rel) => {
                let rhs = iter
                    .next()
                    .ok_or_else(|| perr("constraint without right-hand side".into()))?
                    .parse::<f64>()
                    .map_err(|e| perr(format!("bad rhs: {e}")))?;
                let (name, body) = match cur.split_first() {
                    Some((label, rest)) if label.ends_with(':') => (label.trim_end_matches(':').to_string(), rest),
                    _ => return Err(perr("unnamed constraint".into())),
                };
                rows.push((name, parse_terms(body)?, rel, rhs));
                cur.clear();
            }
            None => cur.push(tok),
        }
    }
    if !cur.is_empty() {
        return Err(perr("dangling constraint text".into()));
    }
    Ok(LpFile { objective, rows, bounds, binaries })
}

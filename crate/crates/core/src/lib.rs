//! Balanced k-way partitioning with weight constraints.
//!
//! Nodes of a complete weighted graph are split into `k` classes whose
//! sizes differ by at most one and whose weights lie in `[wl, wu]`, so that
//! the total distance inside classes is minimal. Pairs may be forbidden from
//! sharing a class.
//!
//! The crate provides:
//!
//! * [`instance`]: instances, random generation, dummy completion;
//! * [`solution`]: partitions and their evaluation;
//! * [`tabu`]: a two-stage tabu search;
//! * [`oracle`]: exhaustive enumeration for small instances;
//! * [`model`]: edge-variable formulations and the triangle pool;
//! * [`cuts`]: 2-partition and weight-based valid inequalities;
//! * [`simplex`]: a dense bounded dual simplex;
//! * [`bnc`]: branch-and-cut with five strategy presets;
//! * [`cli`]: the command implementations behind the `kpart` binary.

pub mod bnc;
pub mod cli;
pub mod cuts;
pub mod error;
pub mod instance;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod simplex;
pub mod solution;
pub mod tabu;

pub use bnc::{solve, SolveOptions, SolveReport, SolveStatus, Strategy};
pub use error::{Error, Result};
pub use instance::{Instance, SizeBounds};
pub use solution::{evaluate, Evaluation, Partition};

//! Experiment harness for `ksd_mcmc`.
//!
//! A TOML file describes one experiment. [`run_experiment`] runs its seeded
//! replicates in parallel and returns rows of `(method, seed, n_samples,
//! metric, density_evals)`, which [`output::write_outputs`] stores as CSV
//! next to a plotting script.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind, Overrides};
pub use error::{BenchError, Result};
pub use experiments::{replicate_seed, run_experiment};
pub use output::Row;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/bench.md")]
mod book_bench {}

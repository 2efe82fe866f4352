//! Experiment driver for the `bplambda` crate: JSON configurations, the
//! per-task training loops, CSV/JSON output and the numerical self-checks.

pub mod config;
pub mod output;
pub mod runner;
pub mod verify;

pub use config::{Budget, ExperimentConfig, Hyper, LearnerSpec, ModelSpec, TaskSpec};
pub use output::{write_csv, write_outputs, Summary};
pub use runner::{run_seed, run_seeds, MetricRow, SeedResult};

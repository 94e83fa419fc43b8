//! Experiment runner for the `sdmgrad-core` solvers: TOML configs, CSV
//! trajectories, JSON summaries, and the `sdmgrad` command line.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{
    consistency_sweep, os_benchmark, run_experiment, BenchRow, ExperimentSummary, RunSummary,
    SweepRow,
};

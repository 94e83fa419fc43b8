//! Running configured experiments: repeated runs, λ sweeps and the
//! SDMGrad-OS timing comparison.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sdmgrad_core::{metrics, run_solver, Method, ParameterVector, RunOptions};

use crate::config::ExperimentConfig;
use crate::output::{trajectory_csv, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub start_index: usize,
    pub start: Vec<f64>,
    pub seed: u64,
    pub trajectory: String,
    pub final_stationarity: f64,
    pub final_losses: Vec<f64>,
    pub final_theta: Vec<f64>,
    /// Mean cosine between the applied direction and the target combination
    /// over all logged steps.
    pub mean_target_cosine: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub method: String,
    pub problem: String,
    pub steps: usize,
    pub runs: Vec<RunSummary>,
}

impl ExperimentSummary {
    pub fn mean_final_stationarity(&self) -> Option<f64> {
        mean(self.runs.iter().map(|r| r.final_stationarity))
    }

    pub fn mean_wall_time_s(&self) -> Option<f64> {
        mean(self.runs.iter().map(|r| r.wall_time_s))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Runs every `(start, repeat)` pair of `cfg`, writing
/// `trajectory_start<i>_seed<s>.csv` files and `summary.json` into `cfg.output`.
///
/// Repeat `r` uses seed `cfg.seed + r` for both the noise and the solver.
/// Runs execute in parallel; outputs other than `wall_time_s` do not depend on
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let method = cfg.method()?;
    let problem = cfg.problem.build()?;
    let desc = problem.as_dyn().descriptor();
    let outer = cfg.optimizer.to_core();
    let options = RunOptions {
        record_every: cfg.record_every,
        record_theta: cfg.record_theta,
    };
    std::fs::create_dir_all(&cfg.output)
        .with_context(|| format!("creating output directory {}", cfg.output.display()))?;

    let starts = cfg.problem.starts();
    let jobs: Vec<(usize, u64)> = (0..starts.len())
        .flat_map(|i| (0..cfg.repeats as u64).map(move |r| (i, cfg.seed + r)))
        .collect();

    let runs = jobs
        .par_iter()
        .map(|&(start_index, seed)| -> Result<RunSummary> {
            let problem = problem.as_dyn();
            let start = starts[start_index].clone();
            let theta0 = ParameterVector::new(start.clone())?;
            let clock = Instant::now();
            let traj = run_solver(
                problem,
                method,
                &cfg.solver.to_core(seed),
                &cfg.noise(seed),
                theta0.clone(),
                cfg.steps,
                &outer,
                &options,
            )
            .with_context(|| format!("start {start_index}, seed {seed}"))?;
            let wall_time_s = clock.elapsed().as_secs_f64();

            let final_stationarity = match traj.records.last() {
                Some(r) => r.stationarity,
                None => metrics::pareto_stationarity_default(&problem.gradients(&theta0)?),
            };
            let name = format!("trajectory_start{start_index}_seed{seed}.csv");
            let csv = trajectory_csv(&traj.records, desc.k, desc.m, cfg.record_theta);
            let path = cfg.output.join(&name);
            std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;

            Ok(RunSummary {
                start_index,
                start,
                seed,
                trajectory: name,
                final_stationarity,
                final_losses: problem.losses(&traj.final_theta)?,
                final_theta: traj.final_theta.as_slice().to_vec(),
                mean_target_cosine: mean(traj.records.iter().map(|r| r.target_cosine)),
                wall_time_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = ExperimentSummary {
        method: method.name().to_string(),
        problem: cfg.problem.name().to_string(),
        steps: cfg.steps,
        runs,
    };
    write_json(&cfg.output.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// Final losses averaged over objectives and runs.
    pub mean_final_loss: Option<f64>,
    pub mean_target_cosine: Option<f64>,
    pub mean_final_stationarity: Option<f64>,
}

fn sub_config(cfg: &ExperimentConfig, dir: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        output: dir,
        ..cfg.clone()
    }
}

/// Runs `cfg` once per λ (each into `<output>/lambda_<λ>`) and writes
/// `sweep_lambda.json` with the averaged results.
pub fn consistency_sweep(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut sub = sub_config(cfg, cfg.output.join(format!("lambda_{lambda}")));
        sub.solver.lambda = lambda;
        let summary = run_experiment(&sub)?;
        rows.push(SweepRow {
            lambda,
            mean_final_loss: mean(
                summary
                    .runs
                    .iter()
                    .filter_map(|r| mean(r.final_losses.iter().copied())),
            ),
            mean_target_cosine: mean(summary.runs.iter().filter_map(|r| r.mean_target_cosine)),
            mean_final_stationarity: summary.mean_final_stationarity(),
        });
    }
    write_json(&cfg.output.join("sweep_lambda.json"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    /// Objectives evaluated per draw (`K` for full SDMGrad).
    pub n: usize,
    pub seconds_per_step: f64,
    pub mean_final_stationarity: Option<f64>,
}

/// Times full SDMGrad against SDMGrad-OS for each sample count in `n_values`,
/// writing `bench_os.json` plus per-variant run directories.
pub fn os_benchmark(cfg: &ExperimentConfig, n_values: &[usize]) -> Result<Vec<BenchRow>> {
    let k = cfg.problem.build()?.as_dyn().descriptor().k;
    let steps = cfg.steps.max(1) as f64;
    let mut rows = Vec::with_capacity(n_values.len() + 1);

    let mut full = sub_config(cfg, cfg.output.join("sdmgrad"));
    full.method = Method::Sdmgrad.name().into();
    full.solver.sample_count = None;
    let summary = run_experiment(&full)?;
    rows.push(BenchRow {
        method: full.method.clone(),
        n: k,
        seconds_per_step: summary.mean_wall_time_s().unwrap_or(0.0) / steps,
        mean_final_stationarity: summary.mean_final_stationarity(),
    });

    for &n in n_values {
        let mut os = sub_config(cfg, cfg.output.join(format!("sdmgrad_os_n{n}")));
        os.method = Method::SdmgradOs.name().into();
        os.solver.sample_count = Some(n);
        let summary = run_experiment(&os)?;
        rows.push(BenchRow {
            method: os.method.clone(),
            n,
            seconds_per_step: summary.mean_wall_time_s().unwrap_or(0.0) / steps,
            mean_final_stationarity: summary.mean_final_stationarity(),
        });
    }
    write_json(&cfg.output.join("bench_os.json"), &rows)?;
    Ok(rows)
}

/// Reads a `summary.json` written by [`run_experiment`].
pub fn read_summary(dir: &Path) -> Result<ExperimentSummary> {
    let path = dir.join("summary.json");
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

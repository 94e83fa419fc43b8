use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use sdmgrad_core::project_simplex;
use sdmgrad_harness::config::parse_override;
use sdmgrad_harness::{consistency_sweep, os_benchmark, run_experiment, ExperimentConfig};

/// Stochastic direction-oriented multi-objective gradient descent experiments.
#[derive(Debug, Parser)]
#[command(name = "sdmgrad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a configured experiment.
    Run(Common),
    /// Run the experiment once per λ and report target alignment.
    SweepLambda {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.3, 1.0, 10.0])]
        lambdas: Vec<f64>,
    },
    /// Compare SDMGrad against SDMGrad-OS wall time and stationarity.
    BenchOs {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n-values", value_delimiter = ',', default_values_t = [2, 4, 8])]
        n_values: Vec<usize>,
    },
    /// Project a vector onto the probability simplex.
    Project {
        #[arg(required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Outer steps.
    #[arg(long = "T")]
    steps: Option<usize>,
    /// Dotted-path override, e.g. `--set solver.beta=5`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self, extra: &[(String, String)]) -> Result<ExperimentConfig> {
        let mut overrides = Vec::new();
        if let Some(seed) = self.seed {
            overrides.push(("seed".to_string(), seed.to_string()));
        }
        if let Some(out) = &self.out {
            overrides.push((
                "output".to_string(),
                toml::Value::String(out.display().to_string()).to_string(),
            ));
        }
        if let Some(method) = &self.method {
            overrides.push((
                "method".to_string(),
                toml::Value::String(method.clone()).to_string(),
            ));
        }
        if let Some(lambda) = self.lambda {
            overrides.push(("solver.lambda".to_string(), format!("{lambda:?}")));
        }
        if let Some(steps) = self.steps {
            overrides.push(("steps".to_string(), steps.to_string()));
        }
        for s in &self.set {
            overrides.push(parse_override(s)?);
        }
        overrides.extend_from_slice(extra);
        Ok(ExperimentConfig::load(self.config.as_deref(), &overrides)?)
    }
}

type Overrides = Vec<(String, String)>;

/// Pulls `--a.b value` / `--a.b=value` pairs (any long flag containing a dot)
/// out of the argument list so clap only sees the fixed flags.
fn split_dotted(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut dotted = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let Some(flag) = arg.strip_prefix("--").filter(|f| {
            let key = f.split('=').next().unwrap_or_default();
            key.contains('.') && !key.starts_with(|c: char| c.is_ascii_digit())
        }) else {
            rest.push(arg);
            continue;
        };
        match flag.split_once('=') {
            Some((k, v)) => dotted.push((k.to_string(), v.to_string())),
            None => {
                let value = iter
                    .next()
                    .ok_or_else(|| anyhow::anyhow!("missing value for --{flag}"))?;
                dotted.push((flag.to_string(), value));
            }
        }
    }
    Ok((rest, dotted))
}

fn run() -> Result<()> {
    let (args, dotted) = split_dotted(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    match cli.command {
        Command::Run(common) => {
            let summary = run_experiment(&common.load(&dotted)?)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::SweepLambda { common, lambdas } => {
            let rows = consistency_sweep(&common.load(&dotted)?, &lambdas)?;
            println!("{}", serde_json::to_string_pretty(&rows)?);
        }
        Command::BenchOs { common, n_values } => {
            let rows = os_benchmark(&common.load(&dotted)?, &n_values)?;
            println!("{}", serde_json::to_string_pretty(&rows)?);
        }
        Command::Project { values } => {
            let w = project_simplex(&values)?;
            println!("{}", serde_json::to_string(w.as_slice())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

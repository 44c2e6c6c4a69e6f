//! `sagin`: run, sweep and validate experiment configs.
//!
//! Outputs go under `$SAGIN_OUTPUT_ROOT` (default: the working directory).
//! Exit codes: 0 ok, 2 configuration error, 3 runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sagin_core::config::ExperimentConfig;
use sagin_core::experiment::{self, Axis};
use sagin_core::scenario::Scenario;
use sagin_core::Error;

#[derive(Parser)]
#[command(name = "sagin", version, about = "Hierarchical federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one config; writes trace.txt and summary.csv.
    Run { config: PathBuf },
    /// Run every (value, seed) pair along one axis.
    Sweep {
        config: PathBuf,
        /// n_geo, tau2, non_iid, n_devices, n_air, n_sats, orbits, sync_algo or policy.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Comma-separated seeds; the config's own seed when absent.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Check a config and build its network without training.
    Validate { config: PathBuf },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("cannot read {}: {io}", path.display())),
        other => Failure::Config(other.to_string()),
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let dir = experiment::run_dir(&experiment::output_root(), &cfg, &stem(&config));
            let s = experiment::run_to_dir(&cfg, &dir)?;
            println!(
                "{} seed {}: accuracy {:.4}, total time {:.3} s -> {}",
                s.policy,
                s.seed,
                s.final_accuracy,
                s.total_time,
                dir.display()
            );
        }
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
        } => {
            let cfg = load(&config)?;
            let axis: Axis = axis.parse()?;
            let seeds = if seeds.is_empty() { vec![cfg.seed] } else { seeds };
            let base = experiment::run_dir(&experiment::output_root(), &cfg, &stem(&config));
            let dir = base.join(format!("sweep-{axis}"));
            let result = experiment::sweep(&cfg, axis, &values, &seeds, Some(&dir))?;
            for row in &result.summary {
                println!(
                    "{axis}={}: accuracy {:.4} ± {:.4}, time {:.3} ± {:.3} ({} ok, {} failed)",
                    row.value, row.accuracy_mean, row.accuracy_std, row.time_mean, row.time_std, row.runs, row.failed
                );
            }
            for run in result.runs.iter().filter(|r| !r.ok()) {
                eprintln!("{axis}={} seed {}: {}", run.value, run.seed, run.status);
            }
            println!("-> {}", dir.display());
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let topology = cfg
                .topology
                .build(cfg.links.table()?)
                .map_err(Failure::from)?;
            let scenario = Scenario::new(topology).map_err(|e| Failure::Config(e.to_string()))?;
            println!(
                "ok: {} satellites, {} air nodes, policy {}",
                scenario.n_sats(),
                scenario.n_air(),
                cfg.policy
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

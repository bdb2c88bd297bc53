use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mcts_vs::config::{RegretLabConfig, RunConfig};
use mcts_vs::error::Result;
use mcts_vs::gp::KernelParams;
use mcts_vs::regret_lab::{run_study, GridWorld};
use mcts_vs::runner;

#[derive(Parser)]
#[command(
    name = "mcts-vs",
    about = "High-dimensional black-box optimization with MCTS variable selection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run config (TOML) over all its seeds.
    Run {
        /// Path to the run config file.
        config: PathBuf,
    },
    /// Execute a named built-in suite of runs.
    Bench {
        /// Suite name: smoke, hartmann6_300, figure1_hartmann6_300.
        suite: String,
        /// Base directory for per-config outputs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize recall and best values from a directory of trace CSVs.
    Recall {
        /// Directory containing seed_*.csv files.
        trace_dir: PathBuf,
    },
    /// Run a regret-lab study from a config (TOML) and emit a JSON report.
    Regretlab {
        /// Path to the regret-lab config file.
        config: PathBuf,
    },
    /// Run two configs and compare per-iteration wall time near an
    /// evaluation index. Only the ordering is meaningful.
    Timing {
        config_a: PathBuf,
        config_b: PathBuf,
        /// Evaluation index to compare at.
        #[arg(long, default_value_t = 100)]
        at: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let (_, summary) = runner::run_experiment(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary json"));
            Ok(())
        }
        Command::Bench { suite, out } => {
            let configs = runner::suite(&suite, out.as_deref())?;
            for cfg in configs {
                let (_, summary) = runner::run_experiment(&cfg)?;
                println!("{}", serde_json::to_string_pretty(&summary).expect("summary json"));
            }
            Ok(())
        }
        Command::Recall { trace_dir } => {
            let report = runner::recall_report(&trace_dir)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("recall json"));
            Ok(())
        }
        Command::Regretlab { config } => {
            let cfg = RegretLabConfig::from_path(&config)?;
            let world = GridWorld::new(
                cfg.dims,
                cfg.resolution,
                cfg.upper,
                KernelParams {
                    signal_variance: cfg.signal_variance,
                    length_scale: cfg.length_scale,
                    noise_variance: cfg.noise_variance,
                },
            )?;
            let policy = cfg.parse_policy()?;
            let params = mcts_vs::regret_lab::BoundParams {
                delta: cfg.delta,
                a: cfg.a,
                b: cfg.b,
            };
            let report = run_study(&world, &policy, cfg.horizon, &params, cfg.runs, cfg.seed)?;
            let json = serde_json::to_string_pretty(&report).expect("report json");
            if let Some(path) = &cfg.out {
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)
                        .map_err(|e| mcts_vs::Error::io(parent.to_path_buf(), e))?;
                }
                std::fs::write(path, &json).map_err(|e| mcts_vs::Error::io(path.clone(), e))?;
            }
            println!("{json}");
            Ok(())
        }
        Command::Timing { config_a, config_b, at } => {
            let a = RunConfig::from_path(&config_a)?;
            let b = RunConfig::from_path(&config_b)?;
            let report = runner::compare_timing(&a, &b, at)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("timing json"));
            Ok(())
        }
    }
}

//! `hamreg` — learn pendulum dynamics from trajectory data and reproduce
//! the energy-error experiments.
//!
//! Exit codes: 0 success, 2 training divergence, 3 configuration error,
//! 1 other failures.

use clap::{Parser, Subcommand};
use hamreg::commands::{self, Scale};
use hamreg::config;
use hamreg::error::CliError;
use hamreg_core::physics::SystemId;
use hamreg_core::training::Split;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hamreg", version, about = "Energy-regularized dynamics learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a training dataset CSV from the exact dynamics.
    Generate {
        /// Mechanical system: single | double
        #[arg(long)]
        system: String,
        /// Dataset split: f (full) | s (sparse)
        #[arg(long)]
        split: String,
        /// Initial-condition seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a run-config file.
    Train {
        /// Path to a key=value run config
        config: PathBuf,
        /// Override the config's epoch count
        #[arg(long)]
        epochs: Option<usize>,
        /// Override the config's penalty weight
        #[arg(long = "lambda-h")]
        lambda_h: Option<f64>,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint from unseen initial conditions.
    Evaluate {
        /// Path to a checkpoint JSON
        checkpoint: PathBuf,
        /// Number of test initial conditions
        #[arg(long = "n-ics", default_value_t = commands::DEFAULT_N_ICS)]
        n_ics: usize,
        /// Rollout horizon in seconds
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        /// Test initial-condition seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the energy-level penalty weight over a grid.
    Crossval {
        /// Path to a key=value run config (key `lambda_grid` sets the grid)
        config: PathBuf,
    },
    /// Reproduce a full result table: generate, train all six schemes on
    /// both splits, evaluate, and render.
    Reproduce {
        /// Result table: 1 (single pendulum) | 2 (double pendulum)
        #[arg(long)]
        table: u32,
        /// Protocol scale: full | desk
        #[arg(long, default_value = "desk")]
        scale: String,
        /// Seed for dataset generation, initialization and test draws
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_system(s: &str) -> Result<SystemId, CliError> {
    SystemId::parse(s).ok_or_else(|| CliError::Config(format!("unknown system {s:?}")))
}

fn parse_split(s: &str) -> Result<Split, CliError> {
    Split::parse(s).ok_or_else(|| CliError::Config(format!("unknown split {s:?}")))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Generate {
            system,
            split,
            seed,
            out,
        } => {
            let n = commands::cmd_generate(parse_system(&system)?, parse_split(&split)?, seed, &out)?;
            println!("wrote {n} samples to {}", out.display());
            Ok(0)
        }
        Command::Train {
            config,
            epochs,
            lambda_h,
            seed,
            out,
        } => {
            let mut cfg = config::load_config(&config)?;
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(l) = lambda_h {
                cfg.lambda_h = l;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            cfg.validate()?;
            let summary = commands::cmd_train(&cfg)?;
            match summary.final_loss {
                Some(loss) => println!(
                    "wrote {} (final loss {loss:.6e})",
                    summary.checkpoint_path.display()
                ),
                None => println!("wrote {}", summary.checkpoint_path.display()),
            }
            if summary.diverged {
                eprintln!("training diverged; checkpoint marked accordingly");
                return Ok(2);
            }
            Ok(0)
        }
        Command::Evaluate {
            checkpoint,
            n_ics,
            horizon,
            seed,
            out,
        } => {
            let m = commands::cmd_evaluate(&checkpoint, n_ics, horizon, seed, &out)?;
            if m.diverged {
                println!("{}/{}: diverged", m.scheme, m.dataset_split);
                return Ok(2);
            }
            println!(
                "{}/{}: mean {:.4}% std {:.4}% max {:.4}% over {} ICs, {:.0} s",
                m.scheme, m.dataset_split, m.mean, m.std, m.max, m.n_ics, m.horizon_s
            );
            Ok(0)
        }
        Command::Crossval { config } => {
            let cfg = config::load_config(&config)?;
            let result = commands::cmd_crossval(&cfg)?;
            for s in &result.scores {
                let score = if s.diverged {
                    "-".to_string()
                } else {
                    format!("{:.4}%", s.mean_abs_de_pct)
                };
                println!("lambda_h = {:<8} mean |dE| = {score}", s.lambda);
            }
            println!("best lambda_h: {}", result.best_lambda);
            Ok(0)
        }
        Command::Reproduce {
            table,
            scale,
            seed,
            out,
        } => {
            let system = match table {
                1 => SystemId::Single,
                2 => SystemId::Double,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown table {other}; expected 1 or 2"
                    )))
                }
            };
            let scale = Scale::parse(&scale)
                .ok_or_else(|| CliError::Config(format!("unknown scale {scale:?}")))?;
            let text = commands::cmd_reproduce(system, scale, seed, &out)?;
            print!("{text}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `forge` — drive the basis-distillation pipeline from experiment configs.
//!
//! Subcommands run the stages in order: `generate` datasets, `train` the
//! DeepONet, `extract` the orthonormal basis, then `solve` PDEs in it and
//! `analyze` its approximation power. Artifacts land in the output
//! directory and chain between stages.
//!
//! Exit codes: 0 success (including an expected energy-guard halt), 1
//! internal assertion, 2 I/O failure, 3 missing prerequisite artifact, 4
//! degenerate basis.

use clap::{Args, Parser, Subcommand};
use forge::cli::{commands, config::Preset, ExperimentConfig};
use forge::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "forge",
    about = "Distill orthonormal spectral bases from operator networks and solve periodic PDEs with them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (flat key = value text).
    #[arg(long)]
    config: PathBuf,
    /// Output directory shared by all pipeline stages.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the training preset.
    #[arg(long, value_parser = ["full", "desk"])]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample initial conditions and build training/test datasets.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train the DeepONet on the generated dataset.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Extract the orthonormal basis from the trained model.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Freeze the trunk at times 0, Δt, …, t_train instead of the
        /// config's freeze_times.
        #[arg(long, value_name = "DT")]
        time_sampled: Option<f64>,
    },
    /// Evolve the PDE in the basis and compare against the reference solver.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Consume a basis built for a different PDE.
        #[arg(long, value_name = "PATH")]
        cross_basis: Option<PathBuf>,
    },
    /// Approximation study: coefficient decay, error profiles, bounds.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let preset = match &common.preset {
        Some(p) => Some(Preset::parse(p)?),
        None => None,
    };
    ExperimentConfig::from_file_with_overrides(&common.config, preset, common.seed)
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { common } => {
            let cfg = load_config(&common)?;
            commands::cmd_generate(&cfg, &common.out)
        }
        Command::Train { common } => {
            let cfg = load_config(&common)?;
            commands::cmd_train(&cfg, &common.out)
        }
        Command::Extract {
            common,
            time_sampled,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(dt) = time_sampled {
                if !(dt > 0.0) {
                    return Err(Error::invalid("--time-sampled step must be positive"));
                }
                let n = (cfg.t_train / dt).round() as usize;
                cfg.freeze_times = (0..=n).map(|i| i as f64 * dt).collect();
            }
            commands::cmd_extract(&cfg, &common.out)
        }
        Command::Solve {
            common,
            cross_basis,
        } => {
            let mut cfg = load_config(&common)?;
            if cross_basis.is_some() {
                cfg.cross_basis = cross_basis;
            }
            commands::cmd_solve(&cfg, &common.out)
        }
        Command::Analyze { common } => {
            let cfg = load_config(&common)?;
            commands::cmd_analyze(&cfg, &common.out)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("forge: {err}");
            let code = match err {
                Error::Io(_) => 2,
                Error::MissingPrerequisite(_) => 3,
                Error::DegenerateBasis(_) => 4,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

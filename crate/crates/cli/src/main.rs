//! `nvgyro`: fringe scans, rotation runs, Allan noise runs and the
//! sensitivity budget of the simulated nuclear-spin gyroscope.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage or configuration error.

mod commands;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use nvgyro_core::{ExperimentConfig, RotationProfile};

use commands::Context;

#[derive(Parser)]
#[command(name = "nvgyro", version, about = "Diamond nuclear-spin gyroscope simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; overrides `run.seed`. Without any seed the run is noiseless.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Four single-Ramsey scans, their combination, spectra and a fit.
    Fringes {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs a rate-table program and the gyroscope stream on top of it.
    Gyro {
        #[command(flatten)]
        common: Common,
        /// CSV with columns duration_s,rate_dps,accel_dps2.
        #[arg(long)]
        profile: PathBuf,
        /// Stream length (s); defaults to the profile length.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Non-rotating stream and its Allan deviation.
    Allan {
        #[command(flatten)]
        common: Common,
        /// Stream length (s).
        #[arg(long, default_value_t = 300.0)]
        duration: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shot-noise sensitivity, dynamic range and working point.
    Budget {
        #[command(flatten)]
        common: Common,
        /// Tolerated fractional deviation from linearity.
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        /// Also write budget.json and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Domain(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.into())
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Usage)?;
            ExperimentConfig::from_toml_str(&text)
                .with_context(|| format!("in {}", path.display()))
                .map_err(Failure::Usage)?
        }
        None => ExperimentConfig::default(),
    };
    Ok(cfg)
}

fn load_profile(path: &Path) -> Result<RotationProfile, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Usage)?;
    RotationProfile::from_csv_str(&text)
        .with_context(|| format!("in {}", path.display()))
        .map_err(Failure::Usage)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Fringes { common, .. }
        | Command::Gyro { common, .. }
        | Command::Allan { common, .. }
        | Command::Budget { common, .. } => common,
    };
    let config = load_config(common)?;
    let ctx = Context {
        seed: common.seed.or(config.run.seed),
        config: &config,
        config_path: common.config.as_deref(),
    };
    match &cli.command {
        Command::Fringes { out, .. } => commands::fringes(&ctx, out)?,
        Command::Gyro {
            profile,
            duration,
            out,
            ..
        } => {
            let program = load_profile(profile)?;
            commands::gyro(&ctx, &program, profile, *duration, out)?
        }
        Command::Allan { duration, out, .. } => commands::allan(&ctx, *duration, out)?,
        Command::Budget { epsilon, out, .. } => commands::budget_report(&ctx, *epsilon, out.as_deref())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

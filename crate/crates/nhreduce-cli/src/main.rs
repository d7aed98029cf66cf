//! Command-line driver: simulate builtin nonholonomic systems, run the
//! verification checks of the two-step reduction and export reduced-form and
//! gauge-momentum tables.
//!
//! Exit codes: 0 on success, 1 when a check or drift tolerance fails or the
//! computation breaks down, 2 on configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nhreduce::geometry::FdMode;
use nhreduce::NhError;
use thiserror::Error;

mod config;
mod momenta;
mod output;
mod reduce;
mod simulate;
mod verify;

use config::{parse_list, resolve, Overrides};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Failed(String),
    #[error("output error: {0}")]
    Io(String),
    #[error(transparent)]
    Compute(#[from] NhError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "nhreduce", version, about = "Symmetry reduction of nonholonomic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// Builtin system: particle, snakeboard, chaplygin_ball, solid_of_revolution.
    #[arg(long)]
    system: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Momentum level, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    level: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Tolerance applied to every drift or residual check.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the dynamics and monitor energy and gauge momenta.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Run the residual checks on seeded random samples.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Samples per check.
        #[arg(long)]
        samples: Option<usize>,
        /// Checks to run, comma separated.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        /// Drop the gauge terms from the reduced form (negative control).
        #[arg(long)]
        omit_gauge: bool,
    },
    /// Tabulate the reduced form and magnetic term on a grid of the leaf.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Grid points per base direction.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Solve the gauge-momentum equation and tabulate its solution.
    Momenta {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        points: Option<usize>,
    },
}

fn overrides(c: &Common) -> Result<Overrides, CliError> {
    let level = c
        .level
        .as_deref()
        .map(parse_list)
        .transpose()
        .map_err(|e| CliError::Config(format!("--level: {e}")))?;
    Ok(Overrides {
        system: c.system.clone(),
        level,
        seed: c.seed,
        output: c.output.clone(),
        tolerance: c.tolerance,
        ..Overrides::default()
    })
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Simulate { common, dt, t_final } => {
            let o = Overrides {
                dt,
                t_final,
                ..overrides(&common)?
            };
            simulate::run(&resolve(common.config.as_deref(), &o, FdMode::Central)?)
        }
        Command::Verify {
            common,
            samples,
            checks,
            omit_gauge,
        } => {
            let o = Overrides {
                samples,
                checks,
                ..overrides(&common)?
            };
            verify::run(&resolve(common.config.as_deref(), &o, FdMode::Richardson)?, omit_gauge)
        }
        Command::Reduce { common, points } => {
            let o = Overrides {
                points,
                ..overrides(&common)?
            };
            reduce::run(&resolve(common.config.as_deref(), &o, FdMode::Richardson)?)
        }
        Command::Momenta { common, points } => {
            let o = Overrides {
                points,
                ..overrides(&common)?
            };
            momenta::run(&resolve(common.config.as_deref(), &o, FdMode::Richardson)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

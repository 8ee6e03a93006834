//! `hcsck`: verification suites, spectra, continuity solves and sweeps for
//! the HcscK moment-map system.
//!
//! Exit codes: 0 converged (or all checks passed), 1 verification failure,
//! 2 obstructed, 3 margin breach, 4 step underflow, 5 usage or I/O error.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::{RawConfig, RunConfig};

const EXIT_ERROR: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "hcsck", version, about = "Solver and verification suite for the HcscK system on Riemann surfaces")]
struct Cli {
    /// TOML file of flat dotted keys (`surface.kind = "torus"`).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set surface.grid_n=96`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Shorthand for `--set output.dir=DIR`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the identity and property suite at two grid sizes.
    Verify,
    /// Low spectra and kernel dimensions of the Bochner-type operators.
    Spectrum {
        /// bochner_on_K, bochner_on_K2 or bochner; all three by default.
        #[arg(long = "operator")]
        operators: Vec<String>,
    },
    /// Follow the continuity path to t = 1 for the configured data.
    Solve {
        /// Run even when the data exceed the configured thresholds.
        #[arg(long)]
        force: bool,
        /// Warm restart from a checkpoint directory.
        #[arg(long, value_name = "DIR")]
        resume: Option<PathBuf>,
    },
    /// Solve once per value of one configuration key.
    Sweep {
        /// The key to vary, e.g. `data.tau_c0`.
        #[arg(long)]
        param: String,
        /// `a:b:n`, or values separated by `,` (or by `;` for list-valued keys).
        #[arg(long)]
        values: String,
        #[arg(long)]
        force: bool,
    },
    /// Print a summary of a JSON report.
    Report { file: PathBuf },
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HCSCK_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("HCSCK_THREADS must be a positive integer, got `{v}`"))?;
    anyhow::ensure!(n > 0, "HCSCK_THREADS must be positive");
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    configure_threads()?;
    let mut overrides = cli.overrides.clone();
    if let Some(o) = &cli.out {
        overrides.push(format!("output.dir={}", o.display()));
    }
    let raw = RawConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Report { file } => commands::cmd_report(&file),
        Command::Sweep { param, values, force } => commands::cmd_sweep(&raw, &param, &values, force),
        command => {
            let cfg = RunConfig::resolve(&raw)?;
            match command {
                Command::Verify => verify::cmd_verify(&cfg),
                Command::Spectrum { operators } => commands::cmd_spectrum(&cfg, &operators),
                Command::Solve { force, resume } => commands::cmd_solve(&cfg, force, resume.as_deref()),
                Command::Report { .. } | Command::Sweep { .. } => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

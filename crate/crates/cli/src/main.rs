//! `zne-lab`: build mitigation plans, run them under simulated noise and
//! sweep parameters.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical-integrity
//! failure in the simulator.

mod commands;
mod common;
mod method;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use common::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "zne-lab", version, about = "Zero-noise extrapolation by identity insertion")]
struct Cli {
    /// Worker threads (default: available parallelism). Results do not
    /// depend on this value.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the mitigation plan for a circuit as JSON.
    Plan(commands::PlanArgs),
    /// Run one circuit unmitigated and mitigated; print both estimates.
    Run(commands::RunArgs),
    /// Run a JSON sweep spec and write CSV plus a sidecar JSON.
    Sweep {
        spec: PathBuf,
        /// CSV path (overrides the spec's `output`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Inspect or convert device calibration data.
    #[command(subcommand)]
    Devices(commands::DevicesCommand),
}

fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::Plan(args) => commands::plan(args),
        Command::Run(args) => commands::run(args),
        Command::Sweep { spec, output } => sweep::sweep(spec, output.as_deref()),
        Command::Devices(cmd) => commands::devices(cmd),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(usize::from(n));
    }
    let result = pool
        .build()
        .map_err(|e| CliError::input(format!("--workers: {e}")))
        .and_then(|pool| pool.install(|| dispatch(&cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

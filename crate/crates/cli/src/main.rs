//! `eulergram <subcommand> --config run.json --out dir/ [--no-timestamp]`

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "eulergram",
    version,
    about = "Euler characteristic and perimeter experiments on planar sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Digitize a shape and report its lattice Euler characteristic.
    Chi(RunArgs),
    /// Digitized and bicovariogram characteristic along a mesh schedule.
    Sweep(RunArgs),
    /// Directional, `Per_∞` and rotation-averaged perimeter estimates.
    Perimeter(RunArgs),
    /// Entanglement pairs and component bounds on fine truth grids.
    Bounds(RunArgs),
    /// Shot-noise mean Euler characteristic: closed forms against Monte Carlo.
    Shotnoise(RunArgs),
    /// Stationary densities of a shot-noise level set.
    Densities(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config for the subcommand.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Leave the timestamp out of report.json so reruns are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::Chi(a) => ("chi", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Perimeter(a) => ("perimeter", a),
        Command::Bounds(a) => ("bounds", a),
        Command::Shotnoise(a) => ("shotnoise", a),
        Command::Densities(a) => ("densities", a),
    };
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let outcome = commands::run(name, &text)?;
    report::write(&args.out, name, outcome, !args.no_timestamp)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "{}",
                CliError::Usage(e.to_string().trim_end().to_string()).to_json()
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

//! Batch experiment runner for the radau-dae integrator.
//!
//! Subcommands: `solve` (one problem, one grid), `convergence` (order fits
//! across a grid list), `newton-trace` (per-cell iteration histories),
//! `stability` (rasters and ray profiles of the stability function) and
//! `list-problems`. Numeric CSV output uses 17 significant digits and is
//! byte-identical across runs of the same config; every run writes a JSON
//! sidecar embedding the fully resolved configuration.
//!
//! Exit codes: 0 success, 1 solver failure, 2 usage error. The environment
//! variable `RADAU_DAE_THREADS` caps the worker pool for sweep items.

mod commands;
mod config;
mod output;
mod pool;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Failure;

#[derive(Parser)]
#[command(name = "radau-dae", version, about = "ADER-DG time integration experiments for ODE/DAE systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem on one grid; writes trajectory CSV, error CSV
    /// (when an exact solution exists) and a JSON sidecar per degree.
    Solve(commands::SolveArgs),
    /// Fit convergence orders over a list of grids; writes orders.csv,
    /// global_errors.csv and a JSON sidecar.
    Convergence(commands::ConvergenceArgs),
    /// Record Newton increment histories per cell; writes one CSV per
    /// degree with columns cell, iteration, neg_log10_dx.
    NewtonTrace(commands::NewtonTraceArgs),
    /// Raster |R(z)| over a window and profile it along radial rays.
    Stability(commands::StabilityArgs),
    /// List the built-in problems and their parameters.
    ListProblems,
}

fn main() -> ExitCode {
    // clap itself exits with code 2 on unparseable command lines.
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => commands::solve(args),
        Command::Convergence(args) => commands::convergence(args),
        Command::NewtonTrace(args) => commands::newton_trace(args),
        Command::Stability(args) => commands::stability(args),
        Command::ListProblems => commands::list_problems(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! `visgp` command-line interface.
//!
//! Subcommands: `graph` (visibility graph + chordal decomposition +
//! diagnostics, with an adjacency cache), `fit` (full or stochastic-gradient
//! maximum likelihood), `predict` (site-wise kriging to CSV), `simulate`
//! (replicated synthetic-domain studies), and `covsel-check` (covariance
//! selection property verification).
//!
//! Exit codes: 0 ok, 2 input error, 3 points outside the domain,
//! 4 non-convergence (artifacts are still written).

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "visgp",
    version,
    about = "Gaussian-process kriging on non-convex domains via visibility graphs"
)]
struct Cli {
    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or load from cache) the visibility graph, complete it to a
    /// chordal graph, and export the clique decomposition plus diagnostics.
    Graph(commands::GraphArgs),
    /// Fit the model by full maximum likelihood or graph SGD.
    Fit(commands::FitArgs),
    /// Kriging predictions at new sites.
    Predict(commands::PredictArgs),
    /// Run a replicated simulation scenario and write the score table.
    Simulate(commands::SimulateArgs),
    /// Verify covariance-selection conditions on a random instance.
    CovselCheck(commands::CovselCheckArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        commands::limit_workers(w);
    }
    let cfg = match config::FileConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.command {
        Command::Graph(args) => commands::run_graph(args, &cfg),
        Command::Fit(args) => commands::run_fit(args, &cfg),
        Command::Predict(args) => commands::run_predict(args, &cfg),
        Command::Simulate(args) => commands::run_simulate(args, &cfg),
        Command::CovselCheck(args) => commands::run_covsel_check(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code_for(&e))
        }
    }
}

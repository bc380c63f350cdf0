//! `tubecert`: nonexistence certificates, field self-tests, sweeps and solver
//! runs on thin tubes around planar curves.

mod commands;
mod config;
mod exit;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Flags};

#[derive(Debug, Parser)]
#[command(name = "tubecert", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Critical half-width and the (eps, mu, C) ladder
    Certify,
    /// Finite-difference, boundary, round-trip and mu-bound checks of the field
    Selftest,
    /// mu, C and optional nontrivial-search statistics per half-width
    Sweep,
    /// One solve on the tube mesh
    Solve,
    /// Integral identity residuals under uniform refinement
    Pohozaev,
    /// Write the tube mesh
    Mesh,
}

fn main() {
    let cli = Cli::parse();
    let result = ExperimentConfig::load(&cli.flags).and_then(|cfg| match cli.command {
        Command::Certify => commands::certify(&cfg),
        Command::Selftest => commands::selftest(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Pohozaev => commands::pohozaev(&cfg),
        Command::Mesh => commands::mesh(&cfg),
    });
    match result {
        Ok(code) => std::process::exit(code),
        Err(failure) => {
            eprintln!("error: {failure}");
            std::process::exit(failure.code);
        }
    }
}

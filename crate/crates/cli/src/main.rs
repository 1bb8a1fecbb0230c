//! `cde`: generate instances, run the exchange mechanisms, certify solutions and sweep
//! random corpora.
//!
//! Exit codes: 0 success, 1 a verification failed, 2 bad usage or input, 3 an exhaustive
//! check would exceed its budget.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod error;
mod files;
mod gen;
mod report;
mod run;
mod sweep;
mod verify;

#[derive(Debug, Parser)]
#[command(name = "cde", version, about = "Cooperative data exchange with monetary incentives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen(gen::GenArgs),
    /// Run a mechanism on an instance.
    Run(run::RunArgs),
    /// Certify a rate-payment pair: rationality, stability, optimality.
    Verify(verify::VerifyArgs),
    /// Run both mechanisms on a random corpus and check every property.
    Sweep(sweep::SweepArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => gen::cmd_gen(args),
        Command::Run(args) => run::cmd_run(args),
        Command::Verify(args) => verify::cmd_verify(args),
        Command::Sweep(args) => sweep::cmd_sweep(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! Command-line entry point for the loss laboratory: synthesize datasets,
//! verify gradients and risk theory, train, evaluate, and compare losses.
//!
//! Exit codes are stable: 0 success, 1 I/O (including malformed input
//! files), 2 usage, 3 check failure, 4 numerical failure.

mod commands;
mod error;
mod manifest;

use clap::{Parser, Subcommand};

use commands::{compare, eval, gradcheck, riskcheck, synth, train};

#[derive(Parser)]
#[command(
    name = "zlpr",
    version,
    about = "A loss laboratory for multi-label classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset.
    Synth(synth::SynthArgs),
    /// Check analytic loss gradients against finite differences.
    Gradcheck(gradcheck::GradcheckArgs),
    /// Minimize an exact expected loss and verify the closed-form theory.
    Riskcheck(riskcheck::RiskcheckArgs),
    /// Train a linear model and write model, history, and report files.
    Train(train::TrainArgs),
    /// Evaluate a saved model on a dataset.
    Eval(eval::EvalArgs),
    /// Train several losses across seeds and tabulate test metrics.
    Compare(compare::CompareArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => synth::run(args),
        Command::Gradcheck(args) => gradcheck::run(args),
        Command::Riskcheck(args) => riskcheck::run(args),
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Compare(args) => compare::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}

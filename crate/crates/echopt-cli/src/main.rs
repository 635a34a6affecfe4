//! Command-line workbench for sonar energyscape prediction.

mod commands;
mod manifest;
mod pgm;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "echopt",
    version,
    about = "Simulated in-air sonar workbench: energyscape datasets, next-frame \
             predictors, and closed-loop experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a random-walk drive and write an energyscape dataset.
    GenData(commands::gen_data::Args),
    /// Train the EchoPT model on a dataset and write a checkpoint.
    Train(commands::train::Args),
    /// Predict frames (one-shot or auto-regressive) with any method.
    Predict(commands::predict::Args),
    /// Score all methods over held-out stacks at several horizons.
    Bench(commands::bench::Args),
    /// Run the wheel-slip detection experiment.
    SlipExp(commands::slip_exp::Args),
    /// Run the corridor-following experiment.
    CorridorExp(commands::corridor_exp::Args),
    /// Export dataset frames as grayscale images.
    Export(commands::export::Args),
}

/// Exit codes: 2 config errors, 3 data errors, 4 runtime errors.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    use echopt_core::CoreError;
    if let Some(core) = err.downcast_ref::<CoreError>() {
        return match core {
            CoreError::InvalidConfig(_) | CoreError::InvalidArgument(_) | CoreError::Json(_) => 2,
            CoreError::DataFormat(_) | CoreError::Io(_) => 3,
            _ => 4,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    4
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(args) => commands::gen_data::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Bench(args) => commands::bench::run(args),
        Command::SlipExp(args) => commands::slip_exp::run(args),
        Command::CorridorExp(args) => commands::corridor_exp::run(args),
        Command::Export(args) => commands::export::run(args),
    };
    match result {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::ExitCode::from(exit_code_for(&err))
        }
    }
}

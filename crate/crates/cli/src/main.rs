//! `survmi`: simulation, analysis and imputation from the command line.

mod analyze;
mod config;
mod impute;
mod output;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use survmi_core::Error;

#[derive(Debug, Parser)]
#[command(name = "survmi", version, about = "Cox and Poisson estimation with missing failure indicators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run simulation cells and write a summary table.
    Simulate(simulate::SimulateArgs),
    /// Fit a pooled Cox or Poisson model to a CSV file.
    Analyze(analyze::AnalyzeArgs),
    /// Write completed copies of a CSV file.
    Impute(impute::ImputeArgs),
}

/// Failures caused by the data or the numerics rather than the invocation.
fn is_numerical(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<Error>(),
            Some(
                Error::SingularHessian
                    | Error::SingularInformation
                    | Error::NotConverged
                    | Error::NoEvents
                    | Error::DegenerateTrainingSet(_)
                    | Error::ResampleDegenerate { .. }
                    | Error::AllReplicatesFailed
            )
        )
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(args),
        Command::Analyze(args) => analyze::run(args),
        Command::Impute(args) => impute::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_numerical(&e) { 2 } else { 1 })
        }
    }
}

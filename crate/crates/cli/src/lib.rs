//! Command-line front end: `sample`, `fit`, `predict` and `report`.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use crate::config::{FitOpts, PredictOpts, ReportOpts, SampleOpts};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "dpcrm",
    version,
    about = "Simulate and fit normalized completely random measures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a partition from a normalized CRM.
    Sample(SampleOpts),
    /// Run the augmented MCMC sampler on observed counts.
    Fit(FitOpts),
    /// Posterior predictive bands and KS divergences for a fit.
    Predict(PredictOpts),
    /// Tabulate intervals and KS divergences across fits.
    Report(ReportOpts),
}

pub fn execute(command: Command, argv: &[String]) -> CliResult<()> {
    match command {
        Command::Sample(o) => commands::sample(&o.resolve()?, argv),
        Command::Fit(o) => commands::fit(&o.resolve()?, argv),
        Command::Predict(o) => commands::predict(&o.resolve()?, argv),
        Command::Report(o) => commands::report(&o.resolve()?, argv),
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

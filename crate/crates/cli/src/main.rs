//! Command-line front end: load metric and connection files, run analyses
//! and write `key = value` reports.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use report::{Format, Report};

#[derive(Parser, Debug)]
#[command(name = "projmetric", version, about = "Projective connections and metrics on surfaces")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Tolerance override for the command's pass/fail decision.
    #[arg(long, global = true, value_parser = positive)]
    pub tol: Option<f64>,
    /// Number of sample points.
    #[arg(long, global = true, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = projmetric::flow::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report to a file instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Connection coefficients, Liouville invariants and curvature of a metric.
    Analyze(commands::AnalyzeArgs),
    /// Residuals of the projective symmetry equations for a vector field.
    Symmetry(commands::SymmetryArgs),
    /// Flatness of a connection and the bound on its symmetry algebra.
    Flatness(commands::FlatnessArgs),
    /// Dimension of the space of metrics for a connection of the exponential family.
    Mobility(commands::MobilityArgs),
    /// Show a normal form, or list them all.
    Catalog(commands::CatalogArgs),
    /// Decide whether two normal forms can be isometric.
    Distinguish(commands::DistinguishArgs),
    /// Integrate geodesics and report the drift of quadratic integrals.
    Geodesic(commands::GeodesicArgs),
    /// Run the full acceptance suite.
    Verify,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Indeterminate(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Indeterminate(_) => 3,
        }
    }
}

/// A finished report and whether the command's check held.
pub struct Outcome {
    pub report: Report,
    pub passed: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let common = cli.common.clone();
    let result = match &cli.command {
        Command::Analyze(a) => commands::analyze(a, &common),
        Command::Symmetry(a) => commands::symmetry(a, &common),
        Command::Flatness(a) => commands::flatness(a, &common),
        Command::Mobility(a) => commands::mobility(a, &common),
        Command::Catalog(a) => commands::catalog(a, &common),
        Command::Distinguish(a) => commands::distinguish(a, &common),
        Command::Geodesic(a) => commands::geodesic(a, &common),
        Command::Verify => commands::verify(&common),
    };
    match result {
        Ok(outcome) => {
            let text = outcome.report.render(common.format);
            match &common.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{text}"),
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}: check failed", outcome.report.command());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input("x".into()).code(), 2);
        assert_eq!(CliError::Indeterminate("x".into()).code(), 3);
    }
}

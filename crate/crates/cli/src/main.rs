//! `pharmonic`: radial p-harmonic maps between warped products, from the
//! command line.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use config::{Format, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pharmonic", version, about = "Radial p-harmonic maps and convex-composition counterexamples")]
struct Cli {
    /// Run configuration (TOML, or JSON by extension). Defaults to the canonical model.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Table format (overrides the config's `output.format`).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Suppress the text summary.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the model parameters against every standing hypothesis.
    Validate,
    /// Integrate the radial equation; write the solution and diagnostics table.
    Solve,
    /// Plateau values and decay-rate fit of f'.
    Asymptotics {
        /// Analyse a saved solution instead of solving.
        #[arg(long, value_name = "PATH")]
        solution: Option<PathBuf>,
    },
    /// Scan for certified radii where the p-Laplacian of H∘F is negative.
    Certify {
        #[arg(long, value_name = "PATH")]
        solution: Option<PathBuf>,
    },
    /// Run the solve/certify pipeline over the configured parameter grid.
    Sweep,
    /// Print two-column series from the diagnostics table to stdout.
    PlotData {
        #[arg(long, value_name = "PATH")]
        solution: Option<PathBuf>,
        /// Abscissa column.
        #[arg(long, short, default_value = "s")]
        x: String,
        /// Ordinate column; repeat for several series.
        #[arg(long, short, default_value = "f")]
        y: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ctx = commands::Context {
        out: cli.out.unwrap_or_else(|| config.output.dir.clone()),
        format: cli.format.unwrap_or(config.output.format),
        quiet: cli.quiet,
        config,
    };
    match cli.command {
        Command::Validate => commands::validate(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::Asymptotics { solution } => commands::asymptotics(&ctx, solution.as_deref()),
        Command::Certify { solution } => commands::certify(&ctx, solution.as_deref()),
        Command::Sweep => commands::sweep(&ctx),
        Command::PlotData { solution, x, y } => {
            let text = commands::plot_data(&ctx, solution.as_deref(), &x, &y)?;
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io("stdout".as_ref(), e)),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

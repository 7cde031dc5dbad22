//! Command-line driver: kinetic reports, side-by-side propagation runs, and
//! the randomized invariant suite.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure, 4 tolerance
//! failure.

mod config;
mod error;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use run::EvolveMode;

#[derive(Parser)]
#[command(
    name = "dequant",
    version,
    about = "Deformed kinetic functionals and quantum/classical/deformed propagation on 1D grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate kinetic functionals and identity residuals for a configured state
    Report {
        /// Run configuration (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Directory for report.json (stdout always gets the JSON)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run the variational minimizer and include its trace
        #[arg(long)]
        minimize: bool,
    },
    /// Propagate the configured state and write time-series CSV files
    Evolve {
        /// Run configuration (TOML); requires an [evolution] section
        #[arg(long)]
        config: PathBuf,
        /// Propagation regime
        #[arg(long, value_enum)]
        mode: EvolveMode,
        /// Output directory for CSV series and summary.json
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the randomized invariant suite (deterministic per seed)
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        cases: usize,
        /// Optional config supplying grid and constants (defaults: periodic
        /// [-8, 8], 512 points, hbar = mass = 1)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for verify_report.txt and verify.json
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Report { config, out, minimize } => {
            run::cmd_report(&config, out.as_deref(), minimize)
        }
        Command::Evolve { config, mode, out } => run::cmd_evolve(&config, mode, &out),
        Command::Verify { seed, cases, config, out } => {
            run::cmd_verify(seed, cases, config.as_deref(), out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

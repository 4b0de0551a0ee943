//! Command-line front end: a strict JSON experiment record in, JSON/CSV
//! artifacts out.
//!
//! ```text
//! pqeig <solve|sweep|limit|oracle|residual> --config run.json [--out DIR] [--seed N] [--quiet]
//! ```
//!
//! Exit status: 0 success, 2 invalid configuration, 3 solver failure, 4 I/O.

mod config;
mod output;
mod run;

use std::path::PathBuf;

use clap::Parser;

pub use config::{parse_config, Command, DerivedExponents, FieldSource, RunConfig, CONFIG_VERSION, DEFAULT_GRID};
pub use output::{fmt_f64, grid_csv, sweep_csv, write_atomic, GridSidecar, SWEEP_HEADER};
pub use run::{exit_code, run, EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_STAGNATION};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(
    name = "pqeig",
    version,
    about = "Coupled p/q-Laplacian eigenvalues and their infinity limits"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random seed; overrides `seed` in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
}

/// Parses, runs and maps the outcome to an exit status. Diagnostics go to
/// stderr.
pub fn main_with(cli: Cli) -> i32 {
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return EXIT_IO;
        }
    };
    let mut cfg = match parse_config(&text, cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match run(&cfg, &out, cli.quiet) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Io(_) = e {
                EXIT_IO
            } else {
                exit_code(&e)
            }
        }
    }
}

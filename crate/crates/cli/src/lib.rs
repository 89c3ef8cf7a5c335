//! Scenario loading, command dispatch and report emission for the
//! `gradsense` command-line tool.

pub mod commands;
pub mod error;
pub mod grid;
pub mod report;
pub mod scenario;

pub use commands::{run_command, Command, RunOptions};
pub use error::CliError;
pub use grid::parse_grid;
pub use report::{emit_report, render, Format, Report};
pub use scenario::{load_scenario, parse_scenario, Scenario};

use std::path::PathBuf;
use std::time::Instant;

/// Parsed command line.
#[derive(Debug, Clone, clap::Parser)]
#[command(
    name = "gradsense",
    version,
    about = "Regional gradient observability and sensor placement for the heat equation"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Candidate grid for `scan`, e.g. `0.1:0.9:9` or `8` or `0.25, 1/3; 0.5`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Noise seed, overriding `noise.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Add wall-clock time to JSON reports (makes output non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

/// Run one invocation; the error carries the exit code.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let scenario = load_scenario(&cli.config)?;
    let options = RunOptions {
        grid: cli.grid.clone(),
        seed: cli.seed,
    };
    let mut report = run_command(&scenario, cli.command, &options)?;
    if cli.timing {
        report.body.insert(
            "wall_seconds".into(),
            serde_json::json!(start.elapsed().as_secs_f64()),
        );
    }
    emit_report(&report, cli.format, cli.out.as_deref())
}

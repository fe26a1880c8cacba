//! Batch front end: reads a scenario, runs it, writes tables and reports.

pub mod commands;
pub mod files;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

/// A failure with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, arguments or input files; exit code 2.
    #[error("{0}")]
    Input(String),
    /// The computation failed; exit code 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("cannot write {}: {e}", path.display()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "kinred", version, about = "Moment model reduction for 1D kinetic equations")]
pub struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the reduced model.
    Reduce {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the kinetic reference solver.
    Reference {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the stability audits; failures are reported, not fatal.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bound the error of a reduced run against a reference run.
    Estimate {
        /// Output directory of `reduce`.
        #[arg(long)]
        reduced: PathBuf,
        /// Output directory of `reference`, or of `reduce` for a self-comparison.
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Reduce { config, out } => commands::reduce(&config, &out),
        Command::Reference { config, out } => commands::reference(&config, &out),
        Command::Audit { config, out } => commands::audit(&config, &out),
        Command::Estimate { reduced, reference, out } => commands::estimate(&reduced, &reference, &out),
    }
}

//! Batch runner behind the `skewdim` binary: loads a JSON run configuration,
//! dispatches one command and writes a JSON record plus CSV exports.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod export;
pub mod record;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::RunConfig;
pub use record::OutputRecord;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] skewdim::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for anything the configuration could have prevented, 1 for numeric
    /// and output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                skewdim::Error::InvalidArgument(_) | skewdim::Error::EnumerationCap { .. },
            ) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "skewdim",
    version,
    about = "Pressure, dimension and sampling runs for skew-product Smale systems"
)]
pub struct Cli {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, env = "SKEWDIM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Cylinder-sum pressure with a transfer-matrix cross-check.
    Pressure,
    /// Bowen root, variational sweep and global dimension.
    Dimension,
    /// Sample a measure, estimate local and box dimensions, export the cloud.
    Sample,
    /// Check contraction, the open set condition, induced maps and the derivative formula.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::Dimension => "dimension",
            Command::Sample => "sample",
            Command::Verify => "verify",
        }
    }
}

/// Resolves the configuration from the flags, validates it and runs the command.
pub fn run(cli: &Cli) -> Result<OutputRecord, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    let job = || commands::execute(cli.command, &config);
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(job),
        None => job(),
    }
}

//! `swk`: sliced Wasserstein kernel experiments from the command line.
//!
//! Subcommands: distance, pca, cluster, classify, certify, invert, ingest.
//! Configuration comes from a flat key=value file plus flag overrides; every
//! run writes a resolved-config copy next to its outputs. Exit codes:
//! 0 success, 1 runtime numerical failure, 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod dataset;

use config::ExperimentConfig;

/// CLI failure classes, mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration; the message names the offending field.
    Config(String),
    /// Numerical or I/O failure at run time.
    Runtime(anyhow::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(e) => write!(f, "runtime error: {e:#}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "swk",
    about = "Sliced Wasserstein kernels: distances, embeddings, and kernel learning"
)]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for all randomized procedures.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of projection angles.
    #[arg(long, global = true)]
    angles: Option<usize>,

    /// Gray quantization levels for image ingestion.
    #[arg(long, global = true)]
    levels: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Input directory (density CSVs or class-labeled images).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    #[command(subcommand)]
    task: Task,
}

#[derive(Subcommand)]
enum Task {
    /// Pairwise sliced Wasserstein distance matrix.
    Distance,
    /// Kernel PCA: CPV curves and projections.
    Pca,
    /// Kernel k-means clustering.
    Cluster,
    /// Cross-validated kernel SVM classification.
    Classify,
    /// Empirical positive/conditionally-negative definiteness report.
    Certify,
    /// Invert feature vectors back into densities.
    Invert,
    /// Convert an image tree into density CSVs.
    Ingest,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(angles) = cli.angles {
        cfg.angles = angles;
    }
    if let Some(levels) = cli.levels {
        cfg.levels = levels;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(input) = &cli.input {
        cfg.input = Some(input.clone());
    }
    Ok(cfg)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let cfg = build_config(&cli)?;
    match cli.task {
        Task::Distance => commands::cmd_distance(&cfg),
        Task::Pca => commands::cmd_pca(&cfg),
        Task::Cluster => commands::cmd_cluster(&cfg),
        Task::Classify => commands::cmd_classify(&cfg),
        Task::Certify => commands::cmd_certify(&cfg),
        Task::Invert => commands::cmd_invert(&cfg),
        Task::Ingest => commands::cmd_ingest(&cfg),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("swk: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Runtime(_) => ExitCode::from(1),
            }
        }
    }
}

//! `tumorseg`: batch driver for ensemble fusion, post-processing and
//! evaluation of brain-tumor label volumes.

mod eval;
mod fuse;
mod loss;
mod postproc;
mod render;
mod synth;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tumorseg_core::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "tumorseg", version, about)]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Size of the per-case worker pool (overrides the config value).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic cases: ground truth, member probabilities, manifest.
    Synth(synth::Args),
    /// Average member probabilities and write fused probabilities and labels.
    Fuse(fuse::Args),
    /// Remove small components and smooth label volumes.
    Postproc(postproc::Args),
    /// Score predicted label volumes against ground truth into a CSV report.
    Eval(eval::Args),
    /// Print every loss term for a prediction as one JSON object.
    Loss(loss::Args),
    /// Render one slice of 1 to 3 label volumes side by side as PPM.
    Render(render::Args),
}

/// Outcome of a batch command: how many cases failed.
pub(crate) struct Batch {
    pub failed: usize,
}

impl Batch {
    pub fn ok() -> Self {
        Batch { failed: 0 }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load_with_overrides(cli.config.as_deref(), std::env::vars())
        .with_context(|| match &cli.config {
            Some(p) => format!("loading config {}", p.display()),
            None => "building default config".to_string(),
        })?;
    if let Some(w) = cli.workers {
        anyhow::ensure!(w >= 1, "--workers must be at least 1");
        cfg.workers = w;
    }
    Ok(cfg)
}

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("starting worker pool")
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating directory {}", path.display()))
}

fn run(cli: Cli) -> Result<Batch> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Synth(a) => synth::run(a, &cfg),
        Command::Fuse(a) => fuse::run(a, &cfg),
        Command::Postproc(a) => postproc::run(a, &cfg),
        Command::Eval(a) => eval::run(a, &cfg),
        Command::Loss(a) => loss::run(a, &cfg),
        Command::Render(a) => render::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(batch) if batch.failed == 0 => ExitCode::SUCCESS,
        Ok(batch) => {
            eprintln!("error: {} case(s) failed", batch.failed);
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

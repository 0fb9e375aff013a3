//! `vstain`: synthesize data, train, predict and evaluate virtual-staining models.

mod commands;
mod config;
mod exit;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use vstain_core::metrics::ErrorIndexMode;

use commands::{EvalArgs, PredictArgs};
use config::{RunConfig, Task};
use manifest::RunRecord;

#[derive(Debug, Parser)]
#[command(name = "vstain", version, about = "Virtual fluorescence staining toolkit")]
struct Cli {
    /// Run configuration (`[section]` headers with `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Serial data order; recorded in the run manifest.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Cgan,
    Af,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "cgan")]
        task: TaskArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict the target channel for every field of view in a directory.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        fov: PathBuf,
        #[arg(long)]
        tile: Option<usize>,
        #[arg(long)]
        overlap: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth with matching file names.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Only files ending with this suffix are compared.
        #[arg(long, default_value = ".pgm")]
        suffix: String,
        #[arg(long)]
        beta1: Option<f64>,
        #[arg(long)]
        beta2: Option<f64>,
        #[arg(long)]
        mode: Option<ErrorIndexMode>,
        #[arg(long)]
        mask_threshold: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("in config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    Ok(match cli.seed {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

fn start(cli: &Cli, name: &str, out: &Path, cfg: &RunConfig, task: Option<Task>) -> Result<RunRecord> {
    let mut record = RunRecord::start(name, out, cfg.resolved_text(task), cli.deterministic)?;
    if let Some(path) = &cli.config {
        record.add_input("config", path.parent().unwrap_or(Path::new(".")), path)?;
    }
    Ok(record)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth { out } => commands::run_synth(&cfg, out, start(cli, "synth", out, &cfg, None)?),
        Command::Train { data, task, out } => {
            let task = match task {
                TaskArg::Cgan => Task::Cgan,
                TaskArg::Af => Task::Af,
            };
            commands::run_train(&cfg, task, data, out, start(cli, "train", out, &cfg, Some(task))?)
        }
        Command::Predict { checkpoint, fov, tile, overlap, out } => {
            let tile_side = tile.or(cfg.eval.tile_side);
            let args = PredictArgs {
                checkpoint: checkpoint.clone(),
                fov_dir: fov.clone(),
                tile_side,
                overlap: overlap.or(cfg.eval.overlap),
            };
            commands::run_predict(&args, out, start(cli, "predict", out, &cfg, None)?)
        }
        Command::Eval { pred, gt, suffix, beta1, beta2, mode, mask_threshold, out } => {
            let args = EvalArgs {
                pred_dir: pred.clone(),
                gt_dir: gt.clone(),
                suffix: suffix.clone(),
                beta1: beta1.unwrap_or(cfg.eval.beta1),
                beta2: beta2.unwrap_or(cfg.eval.beta2),
                mode: mode.unwrap_or(cfg.eval.mode),
                mask_threshold: mask_threshold.unwrap_or(cfg.eval.mask_threshold),
            };
            commands::run_eval(&args, out, start(cli, "eval", out, &cfg, None)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit::code_for(&err) as u8)
        }
    }
}

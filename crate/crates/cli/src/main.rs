//! `msinet` command line: train, finetune, predict, eval, ablate, inspect,
//! synth.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Every
//! artifact-producing command writes a `manifest.json` next to its outputs.
//! `MSINET_THREADS` caps the data-parallel width of predict/eval.

mod commands;
mod manifest;
mod settings;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "msinet", version, about = "Saliency prediction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    /// Replace the pyramid-pooling context module by a single wide 3x3 conv.
    NoAspp,
    /// Feed only the last encoder tap to the context module.
    NoConcat,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Flat key=value config file; flags override file entries.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: std::path::PathBuf,
    /// Master seed for everything the command randomizes.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Uniform channel width multiplier in (0, 1].
    #[arg(long)]
    scale: Option<f64>,
    /// Input size as RxC (rows x cols), e.g. 240x320.
    #[arg(long)]
    size: Option<String>,
    /// Architecture ablation variant.
    #[arg(long, value_enum)]
    variant: Option<Variant>,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Dataset manifest CSV (path_image, path_fixations, category).
    #[arg(long)]
    dataset: Option<std::path::PathBuf>,
    /// Generate N synthetic samples instead of loading a dataset.
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
    /// Density blur sigma in pixels (default: width / 32).
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Number of training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Adam step size (full-scale default 1e-6; desk scale up to 1e-3).
    #[arg(long)]
    lr: Option<f64>,
    /// Base checkpoint to fine-tune from (finetune only).
    #[arg(long)]
    weights: Option<std::path::PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Checkpoint to run.
    #[arg(long, required = true)]
    weights: std::path::PathBuf,
    /// Manifest of images to predict on.
    #[arg(long, required = true)]
    dataset: std::path::PathBuf,
    /// Measure throughput over this many repeated passes.
    #[arg(long, default_value_t = 0)]
    timing_repeats: usize,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Ground-truth manifest.
    #[arg(long)]
    dataset: Option<std::path::PathBuf>,
    /// Directory of raw prediction dumps (from `predict`).
    #[arg(long)]
    pred: Option<std::path::PathBuf>,
    /// Density blur sigma in pixels (default: width / 32).
    #[arg(long)]
    sigma: Option<f64>,
    /// Target size RxC of the ground-truth frame.
    #[arg(long)]
    size: Option<String>,
    /// Transport grid cap for EMD, as NxN.
    #[arg(long)]
    grid: Option<String>,
    /// Splits of the sampled AUC variants.
    #[arg(long)]
    splits: Option<usize>,
    /// Multi-model scores CSV for the rank table.
    #[arg(long)]
    values: Option<std::path::PathBuf>,
    /// Comma-separated metric subset of the cumulative rank.
    #[arg(long)]
    rank_subset: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct AblateArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Which ablation to compare against the full architecture.
    #[arg(long, value_enum, required = true)]
    variant: Variant,
    /// Transport grid cap for EMD, as NxN.
    #[arg(long)]
    grid: Option<String>,
    /// Splits of the sampled AUC variants.
    #[arg(long)]
    splits: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct InspectArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of samples to generate.
    #[arg(long, visible_alias = "synthetic", required = true)]
    count: usize,
    /// Sample size RxC.
    #[arg(long)]
    size: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and keep the best-validation checkpoint.
    Train(TrainArgs),
    /// Load base weights, then train with the same optimization setup.
    Finetune(TrainArgs),
    /// Run a checkpoint over images and write saliency maps.
    Predict(PredictArgs),
    /// Score predictions against ground truth; optionally rank models.
    Eval(EvalArgs),
    /// Train baseline and ablated variant on shared data and compare.
    Ablate(AblateArgs),
    /// Parameter and per-frame operation accounting for a configuration.
    Inspect(InspectArgs),
    /// Generate a synthetic eye-tracking dataset on disk.
    Synth(SynthArgs),
}

/// Errors that should exit 2 (bad invocation) vs 1 (failed run).
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> CliError {
        CliError::Runtime(e.into())
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("MSINET_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let result = match cli.command {
        Command::Train(args) => commands::train::run(args, false),
        Command::Finetune(args) => commands::train::run(args, true),
        Command::Predict(args) => commands::predict::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Ablate(args) => commands::ablate::run(args),
        Command::Inspect(args) => commands::inspect::run(args),
        Command::Synth(args) => commands::synth::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

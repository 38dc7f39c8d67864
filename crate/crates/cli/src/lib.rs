//! Batch commands over the tweetsent pipeline. Every command writes its
//! outputs atomically and records a `<output>.manifest.json` with the
//! resolved configuration, input digests and seed.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use tweetsent_core::eval::ThresholdScope;

mod commands;
pub mod manifest;
pub mod predictions;
pub mod settings;

use settings::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "tweetsent", version, about = "Multimodal multi-label tweet classifier")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for the split, initialization and shuffling [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Only log warnings and errors.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean every tweet and learn a subword vocabulary from the result.
    BuildVocab(BuildVocabArgs),
    /// Split, train and write a checkpoint plus JSONL epoch logs.
    Train(TrainArgs),
    /// Write per-label probabilities for every record.
    Predict(PredictArgs),
    /// Score predictions by mean column-wise ROC AUC.
    Evaluate(EvaluateArgs),
    /// Threshold predictions into a 0/1 submission file.
    Submit(SubmitArgs),
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    /// Annotations JSONL.
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of units to aim for, at least 257 [default: 32768].
    #[arg(long)]
    pub target_size: Option<usize>,
    /// Sequence length used to report how many tweets would be truncated
    /// [default: 64].
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub annotations: PathBuf,
    /// Root for relative image paths [default: $TWEETSENT_DATA_DIR or .].
    #[arg(long)]
    pub images_dir: Option<PathBuf>,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Epoch log [default: <out>.log.jsonl].
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// [default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 32]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// [default: 64]
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub train_n: Option<usize>,
    #[arg(long)]
    pub val_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub checkpoint: PathBuf,
    pub annotations: PathBuf,
    #[arg(long)]
    pub images_dir: Option<PathBuf>,
    /// Vocabulary file [default: the one recorded in the checkpoint].
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace every image with the black placeholder, to measure how much
    /// the image branch contributes.
    #[arg(long)]
    pub blackout: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub predictions: PathBuf,
    pub annotations: PathBuf,
    /// Metrics JSON [default: <predictions>.metrics.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub bias: Option<f32>,
    #[arg(long)]
    pub scope: Option<ThresholdScope>,
}

#[derive(Debug, Args)]
pub struct SubmitArgs {
    pub predictions: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Subtracted from the median [default: 0.025].
    #[arg(long)]
    pub bias: Option<f32>,
    /// global or per_column [default: global].
    #[arg(long)]
    pub scope: Option<ThresholdScope>,
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = settings::pick(cli.global.seed, file.seed, 0);
    match cli.command {
        Command::BuildVocab(args) => commands::build_vocab(args, &file, seed),
        Command::Train(args) => commands::train(args, &file, seed),
        Command::Predict(args) => commands::predict(args, &file, seed),
        Command::Evaluate(args) => commands::evaluate(args, &file, seed),
        Command::Submit(args) => commands::submit(args, &file, seed),
    }
}

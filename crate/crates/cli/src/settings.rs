//! Configuration resolution. Command-line flags win over the config file,
//! which wins over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tweetsent_core::eval::{ThresholdRule, ThresholdScope, DEFAULT_BIAS};
use tweetsent_core::model::ModelConfig;
use tweetsent_core::train::TrainConfig;

/// Only consulted when neither a flag nor the config file names an images
/// directory.
pub const DATA_DIR_ENV: &str = "TWEETSENT_DATA_DIR";

/// Split sizes used when the corpus is at least their sum.
pub const DEFAULT_TRAIN_N: usize = 5562;
pub const DEFAULT_VAL_N: usize = 621;

/// Flat `key = value` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub images_dir: Option<PathBuf>,
    pub target_size: Option<usize>,
    pub max_len: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub train_n: Option<usize>,
    pub val_n: Option<usize>,
    pub embed_dim: Option<usize>,
    pub recurrent_units: Option<usize>,
    pub conv_channels: Option<Vec<usize>>,
    pub fusion_hidden: Option<Vec<usize>>,
    pub image_side: Option<usize>,
    /// Allows a branch width other than 128, for small test models.
    pub reduced: Option<bool>,
    pub bias: Option<f32>,
    pub scope: Option<ThresholdScope>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }
}

pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn images_dir(flag: Option<PathBuf>, file: &FileConfig) -> PathBuf {
    flag.or_else(|| file.images_dir.clone())
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// The fixed split when the corpus is large enough, otherwise the same
/// 5562:621 proportion of what is there. A size given on its own takes
/// the other side as the remainder.
pub fn split_sizes(available: usize, train_n: Option<usize>, val_n: Option<usize>) -> Result<(usize, usize)> {
    let sizes = match (train_n, val_n) {
        (Some(t), Some(v)) => (t, v),
        (Some(t), None) => (t, available.saturating_sub(t)),
        (None, Some(v)) => (available.saturating_sub(v), v),
        (None, None) if available >= DEFAULT_TRAIN_N + DEFAULT_VAL_N => (DEFAULT_TRAIN_N, DEFAULT_VAL_N),
        (None, None) => {
            let total = (DEFAULT_TRAIN_N + DEFAULT_VAL_N) as f64;
            let t = (available as f64 * DEFAULT_TRAIN_N as f64 / total).round() as usize;
            (t, available - t)
        }
    };
    if sizes.0 == 0 {
        bail!("the training split is empty ({available} records available)");
    }
    Ok(sizes)
}

pub fn train_config(file: &FileConfig, epochs: Option<usize>, batch_size: Option<usize>, seed: u64) -> TrainConfig {
    let defaults = TrainConfig::default();
    TrainConfig {
        epochs: pick(epochs, file.epochs, defaults.epochs),
        batch_size: pick(batch_size, file.batch_size, defaults.batch_size),
        learning_rate: file.learning_rate.unwrap_or(defaults.learning_rate),
        shuffle_seed: seed,
        ..defaults
    }
}

pub fn model_config(file: &FileConfig, vocab_size: usize, max_len: usize, seed: u64) -> ModelConfig {
    let mut config = ModelConfig::new(vocab_size, seed);
    config.max_len = max_len;
    if let Some(v) = file.embed_dim {
        config.embed_dim = v;
    }
    if let Some(units) = file.recurrent_units {
        config.recurrent_units = units;
        config.branch_dim = 2 * units;
    }
    if let Some(v) = &file.conv_channels {
        config.conv_channels = v.clone();
    }
    if let Some(v) = &file.fusion_hidden {
        config.fusion_hidden = v.clone();
    }
    if let Some(v) = file.image_side {
        config.image_side = v;
    }
    config.reduced = file.reduced.unwrap_or(false);
    config
}

pub fn threshold_rule(file: &FileConfig, bias: Option<f32>, scope: Option<ThresholdScope>) -> Result<ThresholdRule> {
    Ok(ThresholdRule::new(
        pick(bias, file.bias, DEFAULT_BIAS),
        pick(scope, file.scope, ThresholdScope::Global),
    )?)
}

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use log::debug;
use serde_json::json;
use tweetsent_core::dataset::{load_annotations, split_dataset, FsFetcher, ImageResolver};
use tweetsent_core::subword::{SubwordVocabulary, DEFAULT_MAX_LEN};
use tweetsent_core::train::{fit_with, save_checkpoint, TrainEvent};
use tweetsent_core::TextEncoder;

use super::sibling;
use crate::manifest::{sha256_file, ManifestBuilder};
use crate::settings::{self, pick, FileConfig};
use crate::TrainArgs;

pub fn train(args: TrainArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::start("train", seed);
    manifest.input(&args.annotations)?;
    manifest.input(&args.vocab)?;
    let images_dir = settings::images_dir(args.images_dir, file);
    let log_path = args.log.unwrap_or_else(|| sibling(&args.out, ".log.jsonl"));

    let records = load_annotations(&args.annotations)?;
    let (train_n, val_n) = settings::split_sizes(
        records.len(),
        args.train_n.or(file.train_n),
        args.val_n.or(file.val_n),
    )?;
    let split = split_dataset(&records, train_n, val_n, seed)?;

    let vocab = SubwordVocabulary::load(&args.vocab)?;
    let max_len = pick(args.max_len, file.max_len, DEFAULT_MAX_LEN);
    let encoder = TextEncoder::new(vocab, max_len);
    let model_config = settings::model_config(file, encoder.vocab.len(), max_len, seed);
    let train_config = settings::train_config(file, args.epochs, args.batch_size, seed);
    let images = ImageResolver::with_side(FsFetcher::new(&images_dir), model_config.image_side);

    let outcome = fit_with(&split, &encoder, &images, &train_config, &model_config, &mut |event| {
        if let TrainEvent::Batch { epoch, index, size, loss } = event {
            debug!("epoch {epoch} batch {index} ({size} records): loss {loss:.5}");
        }
    })?;

    let vocab_path = std::fs::canonicalize(&args.vocab)
        .with_context(|| format!("resolving {}", args.vocab.display()))?;
    let metadata = BTreeMap::from([
        ("vocab_path".to_string(), vocab_path.display().to_string()),
        ("vocab_sha256".to_string(), sha256_file(&args.vocab)?),
    ]);
    save_checkpoint(&outcome.params, &outcome.optimizer, &metadata, &args.out)?;
    let mut lines = Vec::new();
    for log in &outcome.logs {
        serde_json::to_writer(&mut lines, log)?;
        lines.push(b'\n');
    }
    if let Err(e) = tweetsent_core::io::write_atomic(&log_path, &lines) {
        let _ = std::fs::remove_file(&args.out);
        return Err(e.into());
    }

    manifest.finish(
        json!({
            "images_dir": images_dir,
            "train_n": train_n,
            "val_n": val_n,
            "discarded": split.discarded,
            "train": train_config,
            "model": model_config,
            "final": outcome.logs.last(),
        }),
        &[&args.out, &log_path],
    )?;
    Ok(())
}

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use log::{info, warn};
use serde_json::json;
use tweetsent_core::dataset::{load_annotations, FsFetcher, ImageResolver, ImageTensor};
use tweetsent_core::model::{forward, PredictionMatrix};
use tweetsent_core::subword::SubwordVocabulary;
use tweetsent_core::train::{check_compatible, load_checkpoint};
use tweetsent_core::TextEncoder;

use crate::manifest::{sha256_file, ManifestBuilder};
use crate::predictions::write_predictions;
use crate::settings::{self, FileConfig};
use crate::PredictArgs;

/// Records decoded and scored together, bounding how many images are held
/// in memory.
const CHUNK: usize = 64;

pub fn predict(args: PredictArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::start("predict", seed);
    manifest.input(&args.checkpoint)?;
    manifest.input(&args.annotations)?;
    let checkpoint = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let config = checkpoint.config().clone();

    let recorded = checkpoint.metadata.get("vocab_path").map(PathBuf::from);
    let vocab_path = args
        .vocab
        .or(recorded)
        .ok_or_else(|| anyhow!("checkpoint records no vocabulary; pass --vocab"))?;
    manifest.input(&vocab_path)?;
    let vocab = SubwordVocabulary::load(&vocab_path)?;
    let mut expected = config.clone();
    expected.vocab_size = vocab.len();
    check_compatible(&config, &expected).with_context(|| {
        format!(
            "checkpoint {} (vocab_size {}) is incompatible with vocabulary {} ({} units)",
            args.checkpoint.display(),
            config.vocab_size,
            vocab_path.display(),
            vocab.len()
        )
    })?;
    if let Some(digest) = checkpoint.metadata.get("vocab_sha256") {
        if *digest != sha256_file(&vocab_path)? {
            warn!("{} differs from the vocabulary the checkpoint was trained with", vocab_path.display());
        }
    }

    let images_dir = settings::images_dir(args.images_dir, file);
    let resolver = ImageResolver::with_side(FsFetcher::new(&images_dir), config.image_side);
    let encoder = TextEncoder::new(vocab, config.max_len);
    let records = load_annotations(&args.annotations)?;

    let mut rows = Vec::with_capacity(records.len());
    for chunk in records.chunks(CHUNK) {
        let encoded: Vec<_> = chunk.iter().map(|r| encoder.encode(&r.text)).collect();
        let images: Vec<ImageTensor> = if args.blackout {
            vec![ImageTensor::zeros(config.image_side); chunk.len()]
        } else {
            let refs: Vec<_> = chunk.iter().collect();
            resolver.resolve_all(&refs)
        };
        rows.extend_from_slice(forward(&checkpoint.params, &encoded, &images)?.rows());
    }
    let ids: Vec<String> = records.iter().map(|r| r.tweet_id.clone()).collect();
    write_predictions(&args.out, &ids, &PredictionMatrix::new(rows)?)?;
    info!("wrote {} predictions to {}", ids.len(), args.out.display());

    manifest.finish(
        json!({
            "images_dir": images_dir,
            "vocab": vocab_path,
            "blackout": args.blackout,
            "model": config,
            "records": records.len(),
        }),
        &[&args.out],
    )?;
    Ok(())
}

use anyhow::Result;
use log::info;
use serde_json::json;
use tweetsent_core::dataset::load_annotations;
use tweetsent_core::subword::{build_vocabulary, DEFAULT_MAX_LEN, DEFAULT_TARGET_SIZE};
use tweetsent_core::text::{clean, StopwordList, TokenSequence};

use crate::manifest::ManifestBuilder;
use crate::settings::{pick, FileConfig};
use crate::BuildVocabArgs;

pub fn build_vocab(args: BuildVocabArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::start("build-vocab", seed);
    manifest.input(&args.annotations)?;
    let target_size = pick(args.target_size, file.target_size, DEFAULT_TARGET_SIZE);
    let max_len = pick(args.max_len, file.max_len, DEFAULT_MAX_LEN);

    let records = load_annotations(&args.annotations)?;
    let stopwords = StopwordList::english();
    let corpus: Vec<TokenSequence> = records.iter().map(|r| clean(&r.text, &stopwords)).collect();
    let vocab = build_vocabulary(&corpus, target_size)?;
    vocab.save(&args.out)?;

    let truncated = corpus
        .iter()
        .filter(|t| vocab.segment(&t.joined()).len() > max_len)
        .count();
    info!(
        "{} units from {} tweets; {truncated} would be truncated at max_len {max_len}",
        vocab.len(),
        records.len()
    );
    manifest.finish(
        json!({
            "target_size": target_size,
            "max_len": max_len,
            "units": vocab.len(),
            "records": records.len(),
            "truncated_at_max_len": truncated,
        }),
        &[&args.out],
    )?;
    Ok(())
}

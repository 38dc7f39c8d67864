use std::collections::{HashMap, HashSet};

use anyhow::{bail, Result};
use log::info;
use serde_json::json;
use tweetsent_core::dataset::load_annotations;
use tweetsent_core::eval::{compute_threshold, mean_columnwise_auc};
use tweetsent_core::LabelVector;

use super::sibling;
use crate::manifest::ManifestBuilder;
use crate::predictions::read_predictions;
use crate::settings::{self, FileConfig};
use crate::EvaluateArgs;

const MAX_LISTED: usize = 10;

pub fn evaluate(args: EvaluateArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::start("evaluate", seed);
    manifest.input(&args.predictions)?;
    manifest.input(&args.annotations)?;
    let rule = settings::threshold_rule(file, args.bias, args.scope)?;
    let out = args.out.unwrap_or_else(|| sibling(&args.predictions, ".metrics.json"));

    let table = read_predictions(&args.predictions)?;
    let records = load_annotations(&args.annotations)?;
    let mut by_id: HashMap<&str, &LabelVector> = HashMap::with_capacity(records.len());
    for r in &records {
        if by_id.insert(&r.tweet_id, r.require_labels()?).is_some() {
            bail!("tweet_id {} appears twice in {}", r.tweet_id, args.annotations.display());
        }
    }
    let mut seen = HashSet::with_capacity(table.ids.len());
    for id in &table.ids {
        if !seen.insert(id.as_str()) {
            bail!("tweet_id {id} appears twice in {}", args.predictions.display());
        }
    }
    let unmatched: Vec<&str> = table
        .ids
        .iter()
        .map(String::as_str)
        .filter(|id| !by_id.contains_key(id))
        .chain(records.iter().map(|r| r.tweet_id.as_str()).filter(|id| !seen.contains(id)))
        .collect();
    if !unmatched.is_empty() {
        bail!(
            "{} tweet ids are not in both files; first {}: {}",
            unmatched.len(),
            unmatched.len().min(MAX_LISTED),
            unmatched[..unmatched.len().min(MAX_LISTED)].join(", ")
        );
    }
    let labels: Vec<LabelVector> = table.ids.iter().map(|id| *by_id[id.as_str()]).collect();

    let report = mean_columnwise_auc(&table.matrix, &labels)?;
    let threshold = if table.matrix.is_empty() {
        None
    } else {
        Some(compute_threshold(&table.matrix, &rule)?)
    };
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    tweetsent_core::io::write_atomic(&out, &json)?;
    println!("{}", String::from_utf8_lossy(&json).trim_end());
    info!("mean column-wise ROC AUC: {:?}", report.mean_auc);

    manifest.finish(
        json!({
            "rule": rule,
            "threshold": threshold,
            "mean_auc": report.mean_auc,
            "records": labels.len(),
        }),
        &[&out],
    )?;
    Ok(())
}

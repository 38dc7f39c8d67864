use anyhow::{bail, Result};
use log::info;
use serde_json::json;
use tweetsent_core::eval::{binarize, compute_threshold};

use crate::manifest::ManifestBuilder;
use crate::predictions::{read_predictions, write_submission};
use crate::settings::{self, FileConfig};
use crate::SubmitArgs;

pub fn submit(args: SubmitArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::start("submit", seed);
    manifest.input(&args.predictions)?;
    let rule = settings::threshold_rule(file, args.bias, args.scope)?;
    let table = read_predictions(&args.predictions)?;
    if table.matrix.is_empty() {
        bail!("{} has no prediction rows to threshold", args.predictions.display());
    }
    let threshold = compute_threshold(&table.matrix, &rule)?;
    let labels = binarize(&table.matrix, &threshold);
    write_submission(&args.out, &table.ids, &labels)?;
    info!("threshold {threshold:?}; wrote {} rows to {}", labels.len(), args.out.display());
    manifest.finish(json!({ "rule": rule, "threshold": threshold }), &[&args.out])?;
    Ok(())
}

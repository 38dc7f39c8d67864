//! Post-processing and scoring: the median-minus-bias threshold and mean
//! column-wise ROC AUC.
//!
//! Thresholds are computed in `f32`, the precision of the predictions, so the
//! arithmetic on the default bias is exact where it can be: the median of
//! `{0.1, ..., 0.5}` minus 0.025 is `0.275f32` with no rounding residue.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{LabelVector, LABEL_NAMES, NUM_LABELS};
use crate::model::PredictionMatrix;

pub const DEFAULT_BIAS: f32 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdScope {
    /// One cut from the median of every entry.
    #[default]
    Global,
    /// One cut per label column from that column's median.
    PerColumn,
}

impl std::str::FromStr for ThresholdScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(ThresholdScope::Global),
            "per_column" | "per-column" => Ok(ThresholdScope::PerColumn),
            other => Err(Error::Config(format!(
                "unknown threshold scope {other:?} (expected global or per_column)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub bias: f32,
    pub scope: ThresholdScope,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule {
            bias: DEFAULT_BIAS,
            scope: ThresholdScope::Global,
        }
    }
}

impl ThresholdRule {
    pub fn new(bias: f32, scope: ThresholdScope) -> Result<Self> {
        if !(0.0..1.0).contains(&bias) {
            return Err(Error::Config(format!("bias must lie in [0, 1), got {bias}")));
        }
        Ok(ThresholdRule { bias, scope })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Threshold {
    Global(f32),
    PerColumn([f32; NUM_LABELS]),
}

impl Threshold {
    pub fn for_column(&self, j: usize) -> f32 {
        match self {
            Threshold::Global(t) => *t,
            Threshold::PerColumn(ts) => ts[j],
        }
    }
}

/// Median of `values`; the mean of the middle pair for even counts.
pub fn median(values: &[f32]) -> Result<f32> {
    if values.is_empty() {
        return Err(Error::Input("median of an empty set".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f32::total_cmp);
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

pub fn median_threshold(values: &[f32], bias: f32) -> Result<f32> {
    Ok(median(values)? - bias)
}

pub fn compute_threshold(pred: &PredictionMatrix, rule: &ThresholdRule) -> Result<Threshold> {
    if pred.is_empty() {
        return Err(Error::Input("cannot threshold an empty prediction matrix".into()));
    }
    match rule.scope {
        ThresholdScope::Global => {
            let all: Vec<f32> = pred.values().collect();
            Ok(Threshold::Global(median_threshold(&all, rule.bias)?))
        }
        ThresholdScope::PerColumn => {
            let mut cuts = [0.0; NUM_LABELS];
            for (j, cut) in cuts.iter_mut().enumerate() {
                *cut = median_threshold(&pred.column(j), rule.bias)?;
            }
            Ok(Threshold::PerColumn(cuts))
        }
    }
}

/// 1 where the value is at or above the cut.
pub fn binarize_values(values: &[f32], threshold: f32) -> Vec<u8> {
    values.iter().map(|&v| u8::from(v >= threshold)).collect()
}

pub fn binarize(pred: &PredictionMatrix, threshold: &Threshold) -> Vec<LabelVector> {
    pred.rows()
        .iter()
        .map(|row| {
            let mut out = [0u8; NUM_LABELS];
            for (j, (o, &v)) in out.iter_mut().zip(row).enumerate() {
                *o = u8::from(v >= threshold.for_column(j));
            }
            LabelVector::new(out).expect("entries are 0 or 1")
        })
        .collect()
}

/// Mann-Whitney AUC via average ranks, O(n log n). Tied scores contribute a
/// half. `None` when either class is absent.
pub fn column_roc_auc<T: PartialOrd + Copy>(scores: &[T], labels: &[u8]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l != 0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Twice the rank sum of the positives keeps every tie group's average
    // rank an integer.
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]].partial_cmp(&scores[order[start]]) == Some(Ordering::Equal) {
            end += 1;
        }
        let twice_avg_rank = (start + 1 + end) as u64;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i] != 0).count() as u64;
        twice_rank_sum += twice_avg_rank * pos_in_group;
        start = end;
    }
    let p = positives as u64;
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(Some(twice_u as f64 / (2 * p * negatives as u64) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `None` (JSON null) for single-class columns.
    pub per_column_auc: Vec<Option<f64>>,
    /// Mean over the defined columns; `None` if every column was skipped.
    pub mean_auc: Option<f64>,
    pub columns_skipped: Vec<String>,
    pub positive_rate_per_column: Vec<f64>,
}

pub fn positive_rates(labels: &[LabelVector]) -> [f64; NUM_LABELS] {
    let mut counts = [0usize; NUM_LABELS];
    for l in labels {
        for (c, &v) in counts.iter_mut().zip(l.values()) {
            *c += v as usize;
        }
    }
    counts.map(|c| if labels.is_empty() { 0.0 } else { c as f64 / labels.len() as f64 })
}

pub fn mean_columnwise_auc(pred: &PredictionMatrix, labels: &[LabelVector]) -> Result<MetricsReport> {
    if pred.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} prediction rows but {} label rows",
            pred.len(),
            labels.len()
        )));
    }
    let per_column_auc = (0..NUM_LABELS)
        .into_par_iter()
        .map(|j| {
            let column: Vec<u8> = labels.iter().map(|l| l.values()[j]).collect();
            column_roc_auc(&pred.column(j), &column)
        })
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = per_column_auc.iter().flatten().copied().collect();
    let mean_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let columns_skipped = per_column_auc
        .iter()
        .zip(LABEL_NAMES)
        .filter(|(auc, _)| auc.is_none())
        .map(|(_, name)| name.to_string())
        .collect();
    Ok(MetricsReport {
        per_column_auc,
        mean_auc,
        columns_skipped,
        positive_rate_per_column: positive_rates(labels).to_vec(),
    })
}

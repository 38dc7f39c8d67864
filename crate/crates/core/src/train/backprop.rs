use rayon::prelude::*;

use super::loss::{bce_logit_grad, bce_sum};
use crate::dataset::ImageTensor;
use crate::error::{Error, Result};
use crate::labels::{LabelVector, NUM_LABELS};
use crate::model::{backward_example, trace_example, ModelParams, Real};
use crate::subword::EncodedText;

/// Examples per gradient accumulator. Fixed so the floating point summation
/// order, and therefore the result, does not depend on the thread count.
const ACCUMULATION_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub text: &'a EncodedText,
    pub image: &'a ImageTensor,
    pub labels: &'a LabelVector,
}

#[derive(Debug, Clone)]
pub struct BatchGradients<T> {
    /// Mean binary cross-entropy over the batch.
    pub loss: f64,
    pub probs: Vec<[T; NUM_LABELS]>,
    pub grads: ModelParams<T>,
}

/// Forward and backward pass over a batch.
pub fn loss_and_gradients<T: Real>(params: &ModelParams<T>, batch: &[Example<'_>]) -> Result<BatchGradients<T>> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let n = batch.len();
    let partials = batch
        .par_chunks(ACCUMULATION_CHUNK)
        .map(|chunk| {
            let mut grads = params.zeros_like();
            let mut probs = Vec::with_capacity(chunk.len());
            for ex in chunk {
                let trace = trace_example(params, ex.text, ex.image)?;
                let d_logits = bce_logit_grad(&trace.probs, ex.labels, n);
                backward_example(params, &trace, &d_logits, &mut grads);
                let mut row = [T::zero(); NUM_LABELS];
                row.copy_from_slice(&trace.probs);
                probs.push(row);
            }
            Ok((grads, probs))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut parts = partials.into_iter();
    let (mut grads, mut probs) = parts.next().expect("non-empty batch");
    for (g, p) in parts {
        grads.add_assign(&g);
        probs.extend(p);
    }
    let labels: Vec<LabelVector> = batch.iter().map(|e| *e.labels).collect();
    let loss = bce_sum(&probs, &labels) / (n * NUM_LABELS) as f64;
    Ok(BatchGradients { loss, probs, grads })
}

/// Mean loss only, without gradients.
pub fn batch_loss<T: Real>(params: &ModelParams<T>, batch: &[Example<'_>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let rows = batch
        .par_iter()
        .map(|ex| {
            let trace = trace_example(params, ex.text, ex.image)?;
            let mut row = [T::zero(); NUM_LABELS];
            row.copy_from_slice(&trace.probs);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<LabelVector> = batch.iter().map(|e| *e.labels).collect();
    Ok(bce_sum(&rows, &labels) / (batch.len() * NUM_LABELS) as f64)
}

use rayon::prelude::*;

use super::layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, lstm_backward, lstm_forward,
    relu_backward_in_place, relu_in_place, sigmoid, ConvTrace, LstmStep,
};
use super::params::ModelParams;
use super::prediction::PredictionMatrix;
use super::tensor::Real;
use crate::dataset::ImageTensor;
use crate::error::{Error, Result};
use crate::labels::NUM_LABELS;
use crate::subword::EncodedText;

/// Everything the backward pass needs from one example's forward pass.
pub(crate) struct Trace<T> {
    ids: Vec<u32>,
    embedded: Vec<Vec<T>>,
    fwd_steps: Vec<LstmStep<T>>,
    bwd_steps: Vec<LstmStep<T>>,
    convs: Vec<ConvTrace<T>>,
    flat: Vec<T>,
    proj_pre: Vec<T>,
    /// Input of each fusion layer, then the input of the output layer.
    fusion_inputs: Vec<Vec<T>>,
    fusion_pre: Vec<Vec<T>>,
    pub probs: Vec<T>,
}

fn check_text<T>(params: &ModelParams<T>, encoded: &EncodedText) -> Result<()> {
    if encoded.actual_len > encoded.ids.len() {
        return Err(Error::Input(format!(
            "actual_len {} exceeds {} ids",
            encoded.actual_len,
            encoded.ids.len()
        )));
    }
    let vocab = params.config.vocab_size;
    if let Some(&bad) = encoded.ids.iter().find(|&&id| id as usize >= vocab) {
        return Err(Error::Input(format!("token id {bad} outside vocabulary of {vocab}")));
    }
    Ok(())
}

fn check_image<T>(params: &ModelParams<T>, image: &ImageTensor) -> Result<()> {
    let side = params.config.image_side;
    if image.side() != side {
        return Err(Error::Input(format!(
            "image is {0}x{0} but the model expects {side}x{side}",
            image.side()
        )));
    }
    Ok(())
}

fn check_branch(len: usize, expected: usize, which: &str) -> Result<()> {
    if len != expected {
        return Err(Error::Input(format!(
            "{which} features have length {len}, expected {expected}"
        )));
    }
    Ok(())
}

fn embed<T: Real>(params: &ModelParams<T>, ids: &[u32]) -> Vec<Vec<T>> {
    let dim = params.config.embed_dim;
    let table = params.embedding.data();
    ids.iter()
        .map(|&id| table[id as usize * dim..(id as usize + 1) * dim].to_vec())
        .collect()
}

struct TextTrace<T> {
    embedded: Vec<Vec<T>>,
    fwd_steps: Vec<LstmStep<T>>,
    bwd_steps: Vec<LstmStep<T>>,
    features: Vec<T>,
}

fn text_trace<T: Real>(params: &ModelParams<T>, ids: &[u32]) -> TextTrace<T> {
    let embedded = embed(params, ids);
    let forward_order: Vec<&[T]> = embedded.iter().map(Vec::as_slice).collect();
    let backward_order: Vec<&[T]> = forward_order.iter().rev().copied().collect();
    let (h_fwd, fwd_steps) = lstm_forward(&params.lstm_forward, &forward_order);
    let (h_bwd, bwd_steps) = lstm_forward(&params.lstm_backward, &backward_order);
    let mut features = h_fwd;
    features.extend(h_bwd);
    TextTrace {
        embedded,
        fwd_steps,
        bwd_steps,
        features,
    }
}

struct ImageTrace<T> {
    convs: Vec<ConvTrace<T>>,
    flat: Vec<T>,
    proj_pre: Vec<T>,
    features: Vec<T>,
}

fn image_trace<T: Real>(params: &ModelParams<T>, image: &ImageTensor) -> ImageTrace<T> {
    let mut side = image.side();
    let mut act: Vec<T> = image
        .pixels()
        .iter()
        .map(|&v| T::from(v).expect("finite pixel"))
        .collect();
    let mut convs = Vec::with_capacity(params.conv.len());
    for stage in &params.conv {
        let (pooled, trace) = conv_forward(stage, act, side);
        convs.push(trace);
        act = pooled;
        side /= 2;
    }
    let proj_pre = dense_forward(&params.image_proj, &act);
    let mut features = proj_pre.clone();
    relu_in_place(&mut features);
    ImageTrace {
        convs,
        flat: act,
        proj_pre,
        features,
    }
}

struct FusionTrace<T> {
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    logits: Vec<T>,
}

fn fusion_trace<T: Real>(params: &ModelParams<T>, text: &[T], image: &[T]) -> FusionTrace<T> {
    let mut x: Vec<T> = text.iter().chain(image).copied().collect();
    let mut inputs = Vec::with_capacity(params.fusion.len() + 1);
    let mut pre = Vec::with_capacity(params.fusion.len());
    for layer in &params.fusion {
        let z = dense_forward(layer, &x);
        let mut a = z.clone();
        relu_in_place(&mut a);
        inputs.push(std::mem::replace(&mut x, a));
        pre.push(z);
    }
    let logits = dense_forward(&params.output, &x);
    inputs.push(x);
    FusionTrace { inputs, pre, logits }
}

/// Full forward pass of one example, keeping intermediates.
pub(crate) fn trace_example<T: Real>(
    params: &ModelParams<T>,
    encoded: &EncodedText,
    image: &ImageTensor,
) -> Result<Trace<T>> {
    check_text(params, encoded)?;
    check_image(params, image)?;
    let ids = encoded.active().to_vec();
    let text = text_trace(params, &ids);
    let img = image_trace(params, image);
    let fusion = fusion_trace(params, &text.features, &img.features);
    let probs = fusion.logits.iter().map(|&z| sigmoid(z)).collect();
    Ok(Trace {
        ids,
        embedded: text.embedded,
        fwd_steps: text.fwd_steps,
        bwd_steps: text.bwd_steps,
        convs: img.convs,
        flat: img.flat,
        proj_pre: img.proj_pre,
        fusion_inputs: fusion.inputs,
        fusion_pre: fusion.pre,
        probs,
    })
}

/// Accumulates into `grad` the parameter gradient for one example, given
/// the loss gradient with respect to its output logits.
pub(crate) fn backward_example<T: Real>(
    params: &ModelParams<T>,
    trace: &Trace<T>,
    d_logits: &[T],
    grad: &mut ModelParams<T>,
) {
    let n_fusion = params.fusion.len();
    let mut dx = dense_backward(
        &params.output,
        &mut grad.output,
        &trace.fusion_inputs[n_fusion],
        d_logits,
    );
    for k in (0..n_fusion).rev() {
        relu_backward_in_place(&mut dx, &trace.fusion_pre[k]);
        dx = dense_backward(
            &params.fusion[k],
            &mut grad.fusion[k],
            &trace.fusion_inputs[k],
            &dx,
        );
    }
    let branch = params.config.branch_dim;
    let (d_text, d_image) = dx.split_at(branch);

    let mut d_proj = d_image.to_vec();
    relu_backward_in_place(&mut d_proj, &trace.proj_pre);
    let mut d_act = dense_backward(&params.image_proj, &mut grad.image_proj, &trace.flat, &d_proj);
    for k in (0..params.conv.len()).rev() {
        match conv_backward(&params.conv[k], &mut grad.conv[k], &trace.convs[k], &d_act, k > 0) {
            Some(d) => d_act = d,
            None => break,
        }
    }

    let units = params.config.recurrent_units;
    let forward_order: Vec<&[T]> = trace.embedded.iter().map(Vec::as_slice).collect();
    let backward_order: Vec<&[T]> = forward_order.iter().rev().copied().collect();
    let dx_fwd = lstm_backward(
        &params.lstm_forward,
        &mut grad.lstm_forward,
        &forward_order,
        &trace.fwd_steps,
        &d_text[..units],
    );
    let dx_bwd = lstm_backward(
        &params.lstm_backward,
        &mut grad.lstm_backward,
        &backward_order,
        &trace.bwd_steps,
        &d_text[units..],
    );
    let dim = params.config.embed_dim;
    let len = trace.ids.len();
    let table = grad.embedding.data_mut();
    for (t, &id) in trace.ids.iter().enumerate() {
        let row = &mut table[id as usize * dim..(id as usize + 1) * dim];
        for ((g, &a), &b) in row.iter_mut().zip(&dx_fwd[t]).zip(&dx_bwd[len - 1 - t]) {
            *g += a + b;
        }
    }
}

/// Text branch: embeddings through a forward and a backward LSTM over the
/// non-padding positions; the two final hidden states are concatenated.
pub fn text_branch_forward<T: Real>(params: &ModelParams<T>, batch: &[EncodedText]) -> Result<Vec<Vec<T>>> {
    for e in batch {
        check_text(params, e)?;
    }
    Ok(batch
        .par_iter()
        .map(|e| text_trace(params, e.active()).features)
        .collect())
}

/// Image branch: conv stages, flatten, dense projection with ReLU.
pub fn image_branch_forward<T: Real>(params: &ModelParams<T>, batch: &[ImageTensor]) -> Result<Vec<Vec<T>>> {
    for img in batch {
        check_image(params, img)?;
    }
    Ok(batch
        .par_iter()
        .map(|img| image_trace(params, img).features)
        .collect())
}

/// Fusion head: concatenated branch features through the hidden layers to
/// ten sigmoid probabilities.
pub fn fusion_forward<T: Real>(params: &ModelParams<T>, text: &[T], image: &[T]) -> Result<Vec<T>> {
    let branch = params.config.branch_dim;
    check_branch(text.len(), branch, "text")?;
    check_branch(image.len(), branch, "image")?;
    Ok(fusion_trace(params, text, image)
        .logits
        .into_iter()
        .map(sigmoid)
        .collect())
}

/// Probabilities for each aligned (text, image) pair.
pub fn forward_rows<T: Real>(
    params: &ModelParams<T>,
    encoded: &[EncodedText],
    images: &[ImageTensor],
) -> Result<Vec<[T; NUM_LABELS]>> {
    if encoded.len() != images.len() {
        return Err(Error::Input(format!(
            "{} texts but {} images",
            encoded.len(),
            images.len()
        )));
    }
    encoded
        .par_iter()
        .zip(images)
        .map(|(e, img)| {
            let trace = trace_example(params, e, img)?;
            let mut row = [T::zero(); NUM_LABELS];
            row.copy_from_slice(&trace.probs);
            Ok(row)
        })
        .collect()
}

pub fn forward(
    params: &ModelParams<f32>,
    encoded: &[EncodedText],
    images: &[ImageTensor],
) -> Result<PredictionMatrix> {
    PredictionMatrix::new(forward_rows(params, encoded, images)?)
}

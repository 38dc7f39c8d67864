use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState, TrainConfig};
use super::backprop::{loss_and_gradients, Example};
use super::loss::{bce_sum, correct_count};
use crate::dataset::{DatasetSplit, ImageResolver, ImageTensor, TweetRecord};
use crate::error::{Error, Result};
use crate::features::TextEncoder;
use crate::labels::{LabelVector, NUM_LABELS};
use crate::model::{forward_rows, init_params, ModelConfig, ModelParams};
use crate::subword::EncodedText;

/// Produces the image tensor for a record. Called per batch, so images are
/// never all held in memory at once.
pub trait ImageSource: Sync {
    fn image_for(&self, record: &TweetRecord) -> ImageTensor;
}

impl ImageSource for ImageResolver {
    fn image_for(&self, record: &TweetRecord) -> ImageTensor {
        self.resolve(record)
    }
}

impl<F> ImageSource for F
where
    F: Fn(&TweetRecord) -> ImageTensor + Sync,
{
    fn image_for(&self, record: &TweetRecord) -> ImageTensor {
        self(record)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    /// `None` when the validation set is empty.
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum TrainEvent<'a> {
    Batch {
        epoch: usize,
        index: usize,
        size: usize,
        loss: f64,
    },
    Epoch(&'a EpochLog),
}

pub struct FitOutcome {
    pub params: ModelParams<f32>,
    pub optimizer: AdamState<f32>,
    pub logs: Vec<EpochLog>,
}

const ACCURACY_CUT: f32 = 0.5;

struct Prepared<'a> {
    records: Vec<&'a TweetRecord>,
    encoded: Vec<EncodedText>,
    labels: Vec<LabelVector>,
}

fn prepare<'a>(records: &'a [TweetRecord], encoder: &TextEncoder) -> Result<Prepared<'a>> {
    let labels = records
        .iter()
        .map(|r| r.require_labels().copied())
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        records: records.iter().collect(),
        encoded: records.par_iter().map(|r| encoder.encode(&r.text)).collect(),
        labels,
    })
}

fn load_images(images: &dyn ImageSource, records: &[&TweetRecord]) -> Vec<ImageTensor> {
    records.par_iter().map(|r| images.image_for(r)).collect()
}

pub fn fit(
    split: &DatasetSplit,
    encoder: &TextEncoder,
    images: &dyn ImageSource,
    config: &TrainConfig,
    model_config: &ModelConfig,
) -> Result<FitOutcome> {
    fit_with(split, encoder, images, config, model_config, &mut |_| {})
}

/// Trains from freshly initialized parameters. Each epoch shuffles the
/// training records, steps Adam on every minibatch (the last one may be
/// short) and then scores the validation set.
pub fn fit_with(
    split: &DatasetSplit,
    encoder: &TextEncoder,
    images: &dyn ImageSource,
    config: &TrainConfig,
    model_config: &ModelConfig,
    observer: &mut dyn FnMut(TrainEvent<'_>),
) -> Result<FitOutcome> {
    config.validate()?;
    model_config.validate()?;
    if split.train.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if model_config.vocab_size != encoder.vocab.len() {
        return Err(Error::Config(format!(
            "model vocab_size {} does not match the vocabulary's {} units",
            model_config.vocab_size,
            encoder.vocab.len()
        )));
    }
    if model_config.max_len != encoder.max_len {
        return Err(Error::Config(format!(
            "model max_len {} does not match the encoder's {}",
            model_config.max_len, encoder.max_len
        )));
    }

    let train = prepare(&split.train, encoder)?;
    let val = prepare(&split.validation, encoder)?;
    let mut params = init_params::<f32>(model_config)?;
    let mut optimizer = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..train.records.len()).collect();
    let mut logs = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (index, batch_idx) in order.chunks(config.batch_size).enumerate() {
            let recs: Vec<&TweetRecord> = batch_idx.iter().map(|&i| train.records[i]).collect();
            let imgs = load_images(images, &recs);
            let batch: Vec<Example<'_>> = batch_idx
                .iter()
                .zip(&imgs)
                .map(|(&i, image)| Example {
                    text: &train.encoded[i],
                    image,
                    labels: &train.labels[i],
                })
                .collect();
            let step = loss_and_gradients(&params, &batch)?;
            let batch_labels: Vec<LabelVector> = batch.iter().map(|e| *e.labels).collect();
            correct += correct_count(&step.probs, &batch_labels, ACCURACY_CUT);
            loss_sum += step.loss * batch.len() as f64;
            adam_step(&mut params, &step.grads, &mut optimizer, config)?;
            observer(TrainEvent::Batch {
                epoch,
                index,
                size: batch.len(),
                loss: step.loss,
            });
        }
        let n = train.records.len();
        let (val_loss, val_acc) = match evaluate(&params, &val, images, config.batch_size)? {
            Some((l, a)) => (Some(l), Some(a)),
            None => (None, None),
        };
        let log = EpochLog {
            epoch,
            train_loss: loss_sum / n as f64,
            train_acc: correct as f64 / (n * NUM_LABELS) as f64,
            val_loss,
            val_acc,
        };
        info!(
            "epoch {epoch}: train loss {:.5} acc {:.4}, val loss {:?} acc {:?}",
            log.train_loss, log.train_acc, log.val_loss, log.val_acc
        );
        observer(TrainEvent::Epoch(&log));
        logs.push(log);
    }

    Ok(FitOutcome {
        params,
        optimizer,
        logs,
    })
}

fn evaluate(
    params: &ModelParams<f32>,
    data: &Prepared<'_>,
    images: &dyn ImageSource,
    batch_size: usize,
) -> Result<Option<(f64, f64)>> {
    if data.records.is_empty() {
        return Ok(None);
    }
    let mut rows = Vec::with_capacity(data.records.len());
    for start in (0..data.records.len()).step_by(batch_size) {
        let end = (start + batch_size).min(data.records.len());
        let imgs = load_images(images, &data.records[start..end]);
        rows.extend(forward_rows(params, &data.encoded[start..end], &imgs)?);
    }
    let entries = (rows.len() * NUM_LABELS) as f64;
    let loss = bce_sum(&rows, &data.labels) / entries;
    let acc = correct_count(&rows, &data.labels, ACCURACY_CUT) as f64 / entries;
    Ok(Some((loss, acc)))
}

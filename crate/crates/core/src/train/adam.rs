use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-7,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {beta}")));
            }
        }
        if !(self.learning_rate > 0.0) || !(self.adam_epsilon > 0.0) {
            return Err(Error::Config("learning_rate and adam_epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// Bias-corrected Adam update of one slice.
pub fn adam_update_slice<T: Real>(
    params: &mut [T],
    grads: &[T],
    m: &mut [T],
    v: &mut [T],
    step: u64,
    config: &TrainConfig,
) {
    let b1 = config.adam_beta1;
    let b2 = config.adam_beta2;
    let t = step as i32;
    let lr_t = T::from(config.learning_rate / (1.0 - b1.powi(t))).unwrap();
    let inv_bc2 = T::from(1.0 / (1.0 - b2.powi(t))).unwrap();
    let (b1, b2) = (T::from(b1).unwrap(), T::from(b2).unwrap());
    let eps = T::from(config.adam_epsilon).unwrap();
    let one = T::one();
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        *p -= lr_t * *m / ((*v * inv_bc2).sqrt() + eps);
    }
}

/// One optimizer step over every tensor. Nothing is modified if any
/// gradient is non-finite.
pub fn adam_step<T: Real>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut AdamState<T>,
    config: &TrainConfig,
) -> Result<()> {
    for (name, g) in grads.tensors() {
        if !g.is_finite() {
            return Err(Error::Training(format!("non-finite gradient in {name}")));
        }
    }
    state.step += 1;
    let step = state.step;
    let grads = grads.tensors();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for ((((_, p), (_, g)), (_, m)), (_, v)) in params.tensors_mut().into_iter().zip(grads).zip(ms).zip(vs) {
        adam_update_slice(p.data_mut(), g.data(), m.data_mut(), v.data_mut(), step, config);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};

    fn tiny() -> ModelConfig {
        ModelConfig {
            vocab_size: 270,
            max_len: 4,
            embed_dim: 3,
            recurrent_units: 2,
            conv_channels: vec![2],
            fusion_hidden: vec![3],
            num_labels: 10,
            branch_dim: 4,
            image_side: 4,
            seed: 5,
            reduced: true,
        }
    }

    #[test]
    fn single_scalar_step() {
        let cfg = TrainConfig::default();
        let (mut p, mut m, mut v) = ([1.0f64], [0.0], [0.0]);
        adam_update_slice(&mut p, &[1.0], &mut m, &mut v, 1, &cfg);
        // m_hat = v_hat = 1 at t = 1, so the step is lr / (1 + eps)
        assert!((p[0] - (1.0 - 1e-3 / (1.0 + 1e-7))).abs() < 1e-15);
        assert!((p[0] - 0.999).abs() < 1e-9);

        let (mut p32, mut m32, mut v32) = ([1.0f32], [0.0f32], [0.0f32]);
        adam_update_slice(&mut p32, &[1.0], &mut m32, &mut v32, 1, &cfg);
        assert!((p32[0] - 0.999).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut params = init_params::<f32>(&tiny()).unwrap();
        let before = params.clone();
        let grads = params.zeros_like();
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut state, &TrainConfig::default()).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn deterministic_and_rejects_nan() {
        let params = init_params::<f32>(&tiny()).unwrap();
        let mut grads = params.zeros_like();
        for (i, g) in grads.output.weight.data_mut().iter_mut().enumerate() {
            *g = (i as f32 * 0.37).sin();
        }
        let run = || {
            let mut p = params.clone();
            let mut s = AdamState::new(&p);
            adam_step(&mut p, &grads, &mut s, &TrainConfig::default()).unwrap();
            (p, s)
        };
        assert_eq!(run(), run());

        grads.conv[0].bias.data_mut()[1] = f32::NAN;
        let mut p = params.clone();
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &grads, &mut s, &TrainConfig::default()).unwrap_err();
        assert!(err.to_string().contains("conv.0.bias"), "{err}");
        assert_eq!(p, params);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn config_validation() {
        TrainConfig::default().validate().unwrap();
        let bad = [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { adam_beta1: 1.0, ..Default::default() },
            TrainConfig { adam_beta2: 0.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn second_moments_stay_non_negative() {
        let mut params = init_params::<f64>(&tiny()).unwrap();
        let mut state = AdamState::new(&params);
        let mut grads = params.zeros_like();
        for step in 0..5 {
            for (_, g) in grads.tensors_mut() {
                for (i, v) in g.data_mut().iter_mut().enumerate() {
                    *v = ((i + step) as f64 * 1.3).cos();
                }
            }
            adam_step(&mut params, &grads, &mut state, &TrainConfig::default()).unwrap();
        }
        assert!(state.v.tensors().iter().all(|(_, t)| t.data().iter().all(|&x| x >= 0.0)));
        assert_eq!(state.step, 5);
    }
}

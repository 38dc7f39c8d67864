use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, KERNEL_SIZE};
use super::tensor::{real, Real, Tensor};
use crate::error::Result;

/// One LSTM direction. Gate rows are ordered input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    /// `[4H, E]`
    pub w_input: Tensor<T>,
    /// `[4H, H]`
    pub w_hidden: Tensor<T>,
    /// `[4H]`
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    /// `[3, 3, C_in, C_out]`
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    /// `[in, out]`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Every learnable weight of the text branch, image branch and fusion head,
/// together with the configuration that fixes their shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    /// `[vocab_size, embed_dim]`
    pub embedding: Tensor<T>,
    pub lstm_forward: LstmParams<T>,
    pub lstm_backward: LstmParams<T>,
    pub conv: Vec<ConvParams<T>>,
    pub image_proj: DenseParams<T>,
    pub fusion: Vec<DenseParams<T>>,
    pub output: DenseParams<T>,
}

impl<T: Real> LstmParams<T> {
    fn zeros(input: usize, units: usize) -> Self {
        LstmParams {
            w_input: Tensor::zeros(&[4 * units, input]),
            w_hidden: Tensor::zeros(&[4 * units, units]),
            bias: Tensor::zeros(&[4 * units]),
        }
    }
}

impl<T: Real> DenseParams<T> {
    fn zeros(input: usize, output: usize) -> Self {
        DenseParams {
            weight: Tensor::zeros(&[input, output]),
            bias: Tensor::zeros(&[output]),
        }
    }
}

impl<T: Real> ModelParams<T> {
    /// All-zero parameters shaped for `config`.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let units = config.recurrent_units;
        let mut conv = Vec::with_capacity(config.conv_channels.len());
        let mut c_in = 3;
        for &c_out in &config.conv_channels {
            conv.push(ConvParams {
                kernel: Tensor::zeros(&[KERNEL_SIZE, KERNEL_SIZE, c_in, c_out]),
                bias: Tensor::zeros(&[c_out]),
            });
            c_in = c_out;
        }
        let mut fusion = Vec::with_capacity(config.fusion_hidden.len());
        let mut width = 2 * config.branch_dim;
        for &h in &config.fusion_hidden {
            fusion.push(DenseParams::zeros(width, h));
            width = h;
        }
        Ok(ModelParams {
            config: config.clone(),
            embedding: Tensor::zeros(&[config.vocab_size, config.embed_dim]),
            lstm_forward: LstmParams::zeros(config.embed_dim, units),
            lstm_backward: LstmParams::zeros(config.embed_dim, units),
            conv,
            image_proj: DenseParams::zeros(config.flattened_image_dim(), config.branch_dim),
            fusion,
            output: DenseParams::zeros(width, config.num_labels),
        })
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|t| t.zeros_like())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        self.map(|t| t.cast())
    }

    fn map<U>(&self, mut f: impl FnMut(&Tensor<T>) -> Tensor<U>) -> ModelParams<U> {
        let mut lstm = |p: &LstmParams<T>| LstmParams {
            w_input: f(&p.w_input),
            w_hidden: f(&p.w_hidden),
            bias: f(&p.bias),
        };
        let lstm_forward = lstm(&self.lstm_forward);
        let lstm_backward = lstm(&self.lstm_backward);
        let embedding = f(&self.embedding);
        let conv = self
            .conv
            .iter()
            .map(|c| ConvParams {
                kernel: f(&c.kernel),
                bias: f(&c.bias),
            })
            .collect();
        let mut dense = |d: &DenseParams<T>| DenseParams {
            weight: f(&d.weight),
            bias: f(&d.bias),
        };
        let image_proj = dense(&self.image_proj);
        let fusion = self.fusion.iter().map(&mut dense).collect();
        let output = dense(&self.output);
        ModelParams {
            config: self.config.clone(),
            embedding,
            lstm_forward,
            lstm_backward,
            conv,
            image_proj,
            fusion,
            output,
        }
    }

    /// Named tensors in a fixed order, used for checkpoints, the optimizer
    /// and gradient reporting.
    pub fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        for (name, l) in [("lstm_fwd", &self.lstm_forward), ("lstm_bwd", &self.lstm_backward)] {
            out.push((format!("{name}.w_input"), &l.w_input));
            out.push((format!("{name}.w_hidden"), &l.w_hidden));
            out.push((format!("{name}.bias"), &l.bias));
        }
        for (i, c) in self.conv.iter().enumerate() {
            out.push((format!("conv.{i}.kernel"), &c.kernel));
            out.push((format!("conv.{i}.bias"), &c.bias));
        }
        out.push(("image_proj.weight".into(), &self.image_proj.weight));
        out.push(("image_proj.bias".into(), &self.image_proj.bias));
        for (i, d) in self.fusion.iter().enumerate() {
            out.push((format!("fusion.{i}.weight"), &d.weight));
            out.push((format!("fusion.{i}.bias"), &d.bias));
        }
        out.push(("output.weight".into(), &self.output.weight));
        out.push(("output.bias".into(), &self.output.bias));
        out
    }

    /// Same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = vec![("embedding".to_string(), &mut self.embedding)];
        for (name, l) in [
            ("lstm_fwd", &mut self.lstm_forward),
            ("lstm_bwd", &mut self.lstm_backward),
        ] {
            out.push((format!("{name}.w_input"), &mut l.w_input));
            out.push((format!("{name}.w_hidden"), &mut l.w_hidden));
            out.push((format!("{name}.bias"), &mut l.bias));
        }
        for (i, c) in self.conv.iter_mut().enumerate() {
            out.push((format!("conv.{i}.kernel"), &mut c.kernel));
            out.push((format!("conv.{i}.bias"), &mut c.bias));
        }
        out.push(("image_proj.weight".into(), &mut self.image_proj.weight));
        out.push(("image_proj.bias".into(), &mut self.image_proj.bias));
        for (i, d) in self.fusion.iter_mut().enumerate() {
            out.push((format!("fusion.{i}.weight"), &mut d.weight));
            out.push((format!("fusion.{i}.bias"), &mut d.bias));
        }
        out.push(("output.weight".into(), &mut self.output.weight));
        out.push(("output.bias".into(), &mut self.output.bias));
        out
    }

    pub fn add_assign(&mut self, other: &ModelParams<T>) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }
}

/// Glorot-uniform weights from a generator seeded with `config.seed`;
/// zero biases except LSTM forget gates, which start at 1.
pub fn init_params<T: Real>(config: &ModelConfig) -> Result<ModelParams<T>> {
    let mut params = ModelParams::<T>::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let units = config.recurrent_units;

    glorot(&mut rng, &mut params.embedding, config.vocab_size, config.embed_dim);
    for lstm in [&mut params.lstm_forward, &mut params.lstm_backward] {
        glorot(&mut rng, &mut lstm.w_input, config.embed_dim, 4 * units);
        glorot(&mut rng, &mut lstm.w_hidden, units, 4 * units);
        for b in &mut lstm.bias.data_mut()[units..2 * units] {
            *b = T::one();
        }
    }
    let area = KERNEL_SIZE * KERNEL_SIZE;
    for conv in &mut params.conv {
        let (c_in, c_out) = (conv.kernel.shape()[2], conv.kernel.shape()[3]);
        glorot(&mut rng, &mut conv.kernel, area * c_in, area * c_out);
    }
    for dense in std::iter::once(&mut params.image_proj)
        .chain(params.fusion.iter_mut())
        .chain(std::iter::once(&mut params.output))
    {
        let (fan_in, fan_out) = (dense.weight.shape()[0], dense.weight.shape()[1]);
        glorot(&mut rng, &mut dense.weight, fan_in, fan_out);
    }
    Ok(params)
}

fn glorot<T: Real>(rng: &mut ChaCha8Rng, t: &mut Tensor<T>, fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in t.data_mut() {
        *v = real(rng.gen_range(-limit..limit));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            vocab_size: 300,
            max_len: 8,
            embed_dim: 8,
            recurrent_units: 4,
            conv_channels: vec![2, 3],
            fusion_hidden: vec![6],
            num_labels: 10,
            branch_dim: 8,
            image_side: 8,
            seed: 11,
            reduced: true,
        }
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let a = init_params::<f32>(&small()).unwrap();
        let b = init_params::<f32>(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.embedding.shape(), &[300, 8]);
        assert_eq!(a.lstm_forward.w_input.shape(), &[16, 8]);
        assert_eq!(a.conv[1].kernel.shape(), &[3, 3, 2, 3]);
        assert_eq!(a.image_proj.weight.shape(), &[2 * 2 * 3, 8]);
        assert_eq!(a.fusion[0].weight.shape(), &[16, 6]);
        assert_eq!(a.output.weight.shape(), &[6, 10]);

        let mut other = small();
        other.seed = 12;
        assert_ne!(init_params::<f32>(&other).unwrap(), a);
    }

    #[test]
    fn biases_zero_except_forget_gates() {
        let p = init_params::<f64>(&small()).unwrap();
        for (name, t) in p.tensors() {
            if !name.ends_with("bias") {
                continue;
            }
            if name.starts_with("lstm") {
                let d = t.data();
                assert!(d[..4].iter().all(|&v| v == 0.0));
                assert!(d[4..8].iter().all(|&v| v == 1.0));
                assert!(d[8..].iter().all(|&v| v == 0.0));
            } else {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            }
        }
    }

    #[test]
    fn named_tensors_are_unique_and_stable() {
        let mut p = init_params::<f32>(&small()).unwrap();
        let names: Vec<String> = p.tensors().into_iter().map(|(n, _)| n).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
        let mut_names: Vec<String> = p.tensors_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, mut_names);
        assert_eq!(names.first().map(String::as_str), Some("embedding"));
    }
}

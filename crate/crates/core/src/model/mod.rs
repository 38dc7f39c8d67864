//! The three-part network: a bidirectional LSTM text branch, a
//! convolutional image branch, and a dense fusion head over their
//! concatenated 128-wide outputs.

mod config;
mod layers;
mod network;
mod params;
mod prediction;
mod tensor;

pub use config::{ModelConfig, BRANCH_DIM, KERNEL_SIZE};
pub use network::{forward, forward_rows, fusion_forward, image_branch_forward, text_branch_forward};
pub(crate) use network::{backward_example, trace_example};
pub use params::{init_params, ConvParams, DenseParams, LstmParams, ModelParams};
pub use prediction::PredictionMatrix;
pub use tensor::{Real, Tensor};

//! Multimodal multi-label tweet classification.
//!
//! The pipeline: [`dataset`] loads annotations and images, [`text`] cleans
//! tweets, [`subword`] encodes them, [`model`] runs the text/image/fusion
//! network, [`train`] fits it and [`eval`] thresholds predictions and
//! scores them by mean column-wise ROC AUC.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod labels;
pub mod model;
pub mod subword;
pub mod text;
pub mod train;

pub use error::{CheckpointError, Error, Result};
pub use labels::{Label, LabelVector, LABEL_NAMES, NUM_LABELS};
pub use dataset::{ImageTensor, TweetRecord};
pub use features::TextEncoder;
pub use model::{ModelConfig, ModelParams, PredictionMatrix};

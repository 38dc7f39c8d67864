//! Multi-label training: binary cross-entropy over ten sigmoid outputs,
//! Adam, minibatches, checkpoints.

mod adam;
mod backprop;
mod checkpoint;
mod fit;
mod loss;

pub use adam::{adam_step, adam_update_slice, AdamState, TrainConfig};
pub use backprop::{batch_loss, loss_and_gradients, BatchGradients, Example};
pub use checkpoint::{
    check_compatible, decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for,
    save_checkpoint, Checkpoint,
};
pub use fit::{fit, fit_with, EpochLog, FitOutcome, ImageSource, TrainEvent};
pub use loss::{bce_loss, binary_accuracy, LOG_EPS};

use serde::{Deserialize, Serialize};

use crate::dataset::IMAGE_SIDE;
use crate::error::{Error, Result};
use crate::labels::NUM_LABELS;
use crate::subword::DEFAULT_MAX_LEN;

/// Width of each branch output fed to the fusion head.
pub const BRANCH_DIM: usize = 128;
pub const KERNEL_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub embed_dim: usize,
    /// LSTM units in each direction; the text branch width is twice this.
    pub recurrent_units: usize,
    pub conv_channels: Vec<usize>,
    pub fusion_hidden: Vec<usize>,
    pub num_labels: usize,
    pub branch_dim: usize,
    pub image_side: usize,
    pub seed: u64,
    /// Lets `branch_dim` differ from 128. Only meant for gradient checks
    /// and other small test networks.
    #[serde(default)]
    pub reduced: bool,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        ModelConfig {
            vocab_size,
            max_len: DEFAULT_MAX_LEN,
            embed_dim: 64,
            recurrent_units: BRANCH_DIM / 2,
            conv_channels: vec![16, 32, 64],
            fusion_hidden: vec![128, 64],
            num_labels: NUM_LABELS,
            branch_dim: BRANCH_DIM,
            image_side: IMAGE_SIDE,
            seed,
            reduced: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.vocab_size == 0 || self.max_len == 0 || self.embed_dim == 0 {
            return fail("vocab_size, max_len and embed_dim must be positive".into());
        }
        if self.recurrent_units == 0 || 2 * self.recurrent_units != self.branch_dim {
            return fail(format!(
                "2 x recurrent_units ({}) must equal branch_dim ({})",
                self.recurrent_units, self.branch_dim
            ));
        }
        if self.num_labels != NUM_LABELS {
            return fail(format!("num_labels must be {NUM_LABELS}, got {}", self.num_labels));
        }
        if !self.reduced && self.branch_dim != BRANCH_DIM {
            return fail(format!("branch_dim must be {BRANCH_DIM}, got {}", self.branch_dim));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return fail("conv_channels must be non-empty and positive".into());
        }
        if self.fusion_hidden.contains(&0) {
            return fail("fusion_hidden widths must be positive".into());
        }
        if self.pooled_side() == 0 {
            return fail(format!(
                "image_side {} is too small for {} pooling stages",
                self.image_side,
                self.conv_channels.len()
            ));
        }
        Ok(())
    }

    /// Spatial side after every conv stage's 2x2 pooling.
    pub fn pooled_side(&self) -> usize {
        self.conv_channels
            .iter()
            .fold(self.image_side, |side, _| side / 2)
    }

    /// Length of the flattened feature map entering the image projection.
    pub fn flattened_image_dim(&self) -> usize {
        let side = self.pooled_side();
        side * side * self.conv_channels.last().copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = ModelConfig::new(32768, 0);
        c.validate().unwrap();
        assert_eq!(c.pooled_side(), 37);
        assert_eq!(c.flattened_image_dim(), 37 * 37 * 64);
    }

    #[test]
    fn branch_width_is_pinned_unless_reduced() {
        let mut c = ModelConfig::new(10, 0);
        c.recurrent_units = 4;
        c.branch_dim = 8;
        assert!(c.validate().is_err());
        c.reduced = true;
        c.validate().unwrap();
        c.recurrent_units = 5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        let base = ModelConfig::new(10, 0);
        let mut c = base.clone();
        c.num_labels = 9;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.image_side = 4;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.conv_channels.clear();
        assert!(c.validate().is_err());
        let mut c = base;
        c.fusion_hidden = vec![0];
        assert!(c.validate().is_err());
    }
}

use crate::error::{Error, Result};
use crate::labels::NUM_LABELS;

/// N x 10 sigmoid probabilities, rows in input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionMatrix {
    rows: Vec<[f32; NUM_LABELS]>,
}

impl PredictionMatrix {
    pub fn new(rows: Vec<[f32; NUM_LABELS]>) -> Result<Self> {
        if let Some(bad) = rows.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite prediction {bad}")));
        }
        Ok(PredictionMatrix { rows })
    }

    pub fn rows(&self) -> &[[f32; NUM_LABELS]] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f32; NUM_LABELS] {
        &self.rows[i]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f32> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// All entries, row-major.
    pub fn values(&self) -> impl Iterator<Item = f32> + '_ {
        self.rows.iter().flatten().copied()
    }
}

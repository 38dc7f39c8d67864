//! The fixed ten-label schema shared by annotation files, predictions and reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_LABELS: usize = 10;

/// Column names in their global order.
pub const LABEL_NAMES: [&str; NUM_LABELS] = [
    "TextOnlyInformative",
    "ImageOnlyInformative",
    "DirectedHate",
    "GeneralizedHate",
    "Sarcasm",
    "Allegation",
    "Justification",
    "Refutation",
    "Support",
    "Oppose",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    TextOnlyInformative,
    ImageOnlyInformative,
    DirectedHate,
    GeneralizedHate,
    Sarcasm,
    Allegation,
    Justification,
    Refutation,
    Support,
    Oppose,
}

impl Label {
    pub const ALL: [Label; NUM_LABELS] = [
        Label::TextOnlyInformative,
        Label::ImageOnlyInformative,
        Label::DirectedHate,
        Label::GeneralizedHate,
        Label::Sarcasm,
        Label::Allegation,
        Label::Justification,
        Label::Refutation,
        Label::Support,
        Label::Oppose,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        LABEL_NAMES[self.index()]
    }
}

/// Ten binary labels in [`LABEL_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct LabelVector([u8; NUM_LABELS]);

impl LabelVector {
    pub fn new(values: [u8; NUM_LABELS]) -> Result<Self> {
        Self::from_slice(&values)
    }

    /// Validates length and that every entry is 0 or 1.
    pub fn from_slice<T>(values: &[T]) -> Result<Self>
    where
        T: Copy + Into<i64>,
    {
        if values.len() != NUM_LABELS {
            return Err(Error::Validation(format!(
                "label vector must have {NUM_LABELS} entries, got {}",
                values.len()
            )));
        }
        let mut out = [0u8; NUM_LABELS];
        for (i, &v) in values.iter().enumerate() {
            match v.into() {
                0 => {}
                1 => out[i] = 1,
                other => {
                    return Err(Error::Validation(format!(
                        "label {} has non-binary value {other}",
                        LABEL_NAMES[i]
                    )))
                }
            }
        }
        Ok(LabelVector(out))
    }

    pub fn values(&self) -> &[u8; NUM_LABELS] {
        &self.0
    }

    pub fn get(&self, label: Label) -> bool {
        self.0[label.index()] == 1
    }

    pub fn as_f32(&self) -> [f32; NUM_LABELS] {
        self.0.map(f32::from)
    }
}

impl<'de> Deserialize<'de> for LabelVector {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = Vec::<i64>::deserialize(deserializer)?;
        LabelVector::from_slice(&raw).map_err(serde::de::Error::custom)
    }
}

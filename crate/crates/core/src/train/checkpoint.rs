//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "TWSCKPT\0"
//! version    u32      1
//! config     u32 length + JSON-encoded ModelConfig
//! metadata   u32 length + JSON object of string pairs
//! adam step  u64
//! count      u32 number of tensors
//! tensor     u32 name length, name (UTF-8), u32 rank, rank x u64 dims,
//!            product(dims) x f32
//! ```
//!
//! Parameter tensors come first under their own names, followed by the
//! optimizer moments as `adam.m.<name>` and `adam.v.<name>`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use super::adam::AdamState;
use crate::error::{CheckpointError, Error, Result};
use crate::model::{ModelConfig, ModelParams, Tensor};

const MAGIC: &[u8; 8] = b"TWSCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub optimizer: AdamState<f32>,
    /// Free-form provenance, such as the vocabulary the model was trained with.
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }
}

fn write_tensor(out: &mut dyn Write, name: &str, t: &Tensor<f32>) -> std::io::Result<()> {
    out.write_all(&(name.len() as u32).to_le_bytes())?;
    out.write_all(name.as_bytes())?;
    out.write_all(&(t.shape().len() as u32).to_le_bytes())?;
    for &d in t.shape() {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn encode_checkpoint(
    params: &ModelParams<f32>,
    optimizer: &AdamState<f32>,
    metadata: &BTreeMap<String, String>,
    out: &mut dyn Write,
) -> std::io::Result<()> {
    let config = serde_json::to_vec(&params.config)?;
    let metadata = serde_json::to_vec(metadata)?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(config.len() as u32).to_le_bytes())?;
    out.write_all(&config)?;
    out.write_all(&(metadata.len() as u32).to_le_bytes())?;
    out.write_all(&metadata)?;
    out.write_all(&optimizer.step.to_le_bytes())?;
    let tensors = params.tensors();
    out.write_all(&(3 * tensors.len() as u32).to_le_bytes())?;
    for (name, t) in &tensors {
        write_tensor(out, name, t)?;
    }
    for (prefix, moments) in [("adam.m.", &optimizer.m), ("adam.v.", &optimizer.v)] {
        for (name, t) in moments.tensors() {
            write_tensor(out, &format!("{prefix}{name}"), t)?;
        }
    }
    Ok(())
}

/// Writes atomically: a failed save leaves no partial file at `path`.
pub fn save_checkpoint(
    params: &ModelParams<f32>,
    optimizer: &AdamState<f32>,
    metadata: &BTreeMap<String, String>,
    path: &Path,
) -> Result<()> {
    crate::io::write_atomic_with(path, |w| encode_checkpoint(params, optimizer, metadata, w))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            CheckpointError::Corrupt(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn corrupt(msg: impl Into<String>) -> Error {
    CheckpointError::Corrupt(msg.into()).into()
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let config_len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| corrupt(format!("config header: {e}")))?;
    config
        .validate()
        .map_err(|e| corrupt(format!("config header: {e}")))?;
    let metadata_len = r.u32()? as usize;
    let metadata: BTreeMap<String, String> = serde_json::from_slice(r.take(metadata_len)?)
        .map_err(|e| corrupt(format!("metadata header: {e}")))?;
    let step = r.u64()?;
    let count = r.u32()? as usize;

    let mut found: HashMap<String, (Vec<usize>, Vec<f32>)> = HashMap::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| corrupt("tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(corrupt(format!("tensor {name} has rank {rank}")));
        }
        let dims = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| corrupt(format!("tensor {name} is impossibly large")))?;
        let data = r
            .take(n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if found.insert(name.clone(), (dims, data)).is_some() {
            return Err(corrupt(format!("tensor {name} appears twice")));
        }
    }
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let mut params = ModelParams::<f32>::zeros(&config)?;
    let mut optimizer = AdamState::new(&params);
    optimizer.step = step;
    let mut fill = |name: String, t: &mut Tensor<f32>| -> Result<()> {
        let (dims, data) = found
            .remove(&name)
            .ok_or_else(|| corrupt(format!("missing tensor {name}")))?;
        if dims != t.shape() {
            return Err(corrupt(format!(
                "tensor {name} has shape {dims:?}, config implies {:?}",
                t.shape()
            )));
        }
        t.data_mut().copy_from_slice(&data);
        Ok(())
    };
    for (name, t) in params.tensors_mut() {
        fill(name, t)?;
    }
    for (prefix, moments) in [("adam.m.", &mut optimizer.m), ("adam.v.", &mut optimizer.v)] {
        for (name, t) in moments.tensors_mut() {
            fill(format!("{prefix}{name}"), t)?;
        }
    }
    if let Some(extra) = found.keys().next() {
        return Err(corrupt(format!("unexpected tensor {extra}")));
    }
    Ok(Checkpoint {
        params,
        optimizer,
        metadata,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads and checks that every dimension agrees with `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    check_compatible(ckpt.config(), expected)?;
    Ok(ckpt)
}

pub fn check_compatible(found: &ModelConfig, expected: &ModelConfig) -> Result<()> {
    let scalar = [
        ("vocab_size", found.vocab_size, expected.vocab_size),
        ("max_len", found.max_len, expected.max_len),
        ("embed_dim", found.embed_dim, expected.embed_dim),
        ("recurrent_units", found.recurrent_units, expected.recurrent_units),
        ("branch_dim", found.branch_dim, expected.branch_dim),
        ("image_side", found.image_side, expected.image_side),
        ("conv stages", found.conv_channels.len(), expected.conv_channels.len()),
        ("fusion layers", found.fusion_hidden.len(), expected.fusion_hidden.len()),
    ];
    let widths = found
        .conv_channels
        .iter()
        .zip(&expected.conv_channels)
        .map(|(&a, &b)| ("conv channels", a, b))
        .chain(
            found
                .fusion_hidden
                .iter()
                .zip(&expected.fusion_hidden)
                .map(|(&a, &b)| ("fusion width", a, b)),
        );
    for (field, checkpoint, expected) in scalar.into_iter().chain(widths) {
        if checkpoint != expected {
            return Err(CheckpointError::DimensionMismatch {
                field: field.to_string(),
                checkpoint,
                expected,
            }
            .into());
        }
    }
    Ok(())
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Record of one command run, written next to its primary output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: Value,
    /// Input path to hex SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_unix_secs: u64,
    pub duration_secs: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn manifest_path(primary_output: &Path) -> PathBuf {
    let mut name = primary_output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary_output.with_file_name(name)
}

pub struct ManifestBuilder {
    command: &'static str,
    seed: u64,
    started: Instant,
    started_unix: u64,
    inputs: BTreeMap<String, String>,
}

impl ManifestBuilder {
    pub fn start(command: &'static str, seed: u64) -> Self {
        ManifestBuilder {
            command,
            seed,
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            inputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Writes the manifest beside `outputs[0]` and returns its path.
    pub fn finish(self, config: Value, outputs: &[&Path]) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            seed: self.seed,
            config,
            inputs: self.inputs,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            started_unix_secs: self.started_unix,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = manifest_path(outputs[0]);
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        tweetsent_core::io::write_atomic(&path, &json)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_and_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(manifest_path(&p), dir.path().join("a.txt.manifest.json"));
    }
}

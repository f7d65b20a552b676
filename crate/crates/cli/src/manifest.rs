//! Output manifest with content hashes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::scenario::Experiment;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to check that a run is reproducible. Contains no
/// timestamps or absolute paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub seed: u64,
    pub scenario_sha256: String,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    /// Hashes `files` (relative to `dir`) in sorted order.
    pub fn build(
        dir: &Path,
        files: &[String],
        experiment: Experiment,
        seed: u64,
        scenario_sha256: String,
    ) -> Result<Self> {
        let mut names = files.to_vec();
        names.sort();
        names.dedup();
        let outputs = names
            .into_iter()
            .map(|name| {
                let path = dir.join(&name);
                let bytes = fs::read(&path).map_err(|source| CliError::Output { path, source })?;
                Ok(OutputEntry { sha256: sha256_hex(&bytes), bytes: bytes.len() as u64, path: name })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { schema_version: crate::scenario::SCHEMA_VERSION, experiment, seed, scenario_sha256, outputs })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).map_err(|source| CliError::Output { path: path.clone(), source })?;
        Ok(path)
    }
}

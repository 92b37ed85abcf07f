//! Run manifests: every artifact-writing run records its command, fully
//! resolved configuration, seed and input/output checksums, so a run can
//! be replayed and compared byte for byte.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct FileStamp {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub version: u32,
    pub command: String,
    pub argv: Vec<String>,
    /// All defaults materialized.
    pub resolved_config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileStamp>,
    pub outputs: Vec<FileStamp>,
}

impl RunManifest {
    pub fn new(command: &str, resolved_config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            version: MANIFEST_VERSION,
            command: command.to_string(),
            argv: std::env::args().collect(),
            resolved_config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn stamp_input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.push(stamp(path)?);
        Ok(())
    }

    pub fn stamp_output(&mut self, path: &Path) -> anyhow::Result<()> {
        self.outputs.push(stamp(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }
}

fn stamp(path: &Path) -> anyhow::Result<FileStamp> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(FileStamp {
        path: path.display().to_string(),
        sha256: hex::encode(hasher.finalize()),
    })
}

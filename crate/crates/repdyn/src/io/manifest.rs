//! Run manifests: each CLI command records its effective configuration,
//! seeds, content hashes of its inputs, wall-clock time, and the artifact
//! paths it produced.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::IoError;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// Subcommand that produced this manifest.
    pub command: String,
    /// Effective configuration snapshot (defaults + overrides).
    pub config: BTreeMap<String, String>,
    /// Seeds in effect, by role.
    pub seeds: BTreeMap<String, u64>,
    /// SHA-256 of every input file, keyed by path.
    pub input_hashes: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
    /// Paths written by the command.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config: BTreeMap::new(),
            seeds: BTreeMap::new(),
            input_hashes: BTreeMap::new(),
            wall_clock_seconds: 0.0,
            artifacts: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), IoError> {
        let digest = sha256_file(path)?;
        self.input_hashes
            .insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn record_artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    /// Writes the manifest next to the primary artifact:
    /// `<artifact>.manifest.json`.
    pub fn write_beside(&self, primary: &Path) -> Result<PathBuf, IoError> {
        let mut name = primary
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        name.push_str(".manifest.json");
        let path = primary.with_file_name(name);
        self.write(&path)?;
        Ok(path)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Content hash of a file, streamed (representation archives run to
/// hundreds of megabytes).
pub fn sha256_file(path: &Path) -> Result<String, IoError> {
    let mut file = File::open(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

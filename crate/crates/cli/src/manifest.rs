//! Output directories with a provenance manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Seconds since the epoch, or `SOURCE_DATE_EPOCH` when set.
pub fn timestamp() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
    {
        return v;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path, label: String) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self {
            path: label,
            sha256: sha256_hex(&bytes),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the resolved config TOML.
    pub config_digest: Option<String>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub started_at: u64,
    pub finished_at: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Collects files written under one directory.
pub struct RunDir {
    root: PathBuf,
    written: Vec<String>,
    inputs: Vec<FileDigest>,
    command: String,
    started_at: u64,
    config_digest: Option<String>,
    seed: Option<u64>,
}

impl RunDir {
    pub fn create(root: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            inputs: Vec::new(),
            command: command.to_string(),
            started_at: timestamp(),
            config_digest: None,
            seed: None,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, relative: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.record(relative);
        Ok(path)
    }

    /// Registers a file produced by other code under the run directory.
    pub fn record(&mut self, relative: &str) {
        if !self.written.iter().any(|w| w == relative) {
            self.written.push(relative.to_string());
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .push(FileDigest::of(path, path.display().to_string())?);
        Ok(())
    }

    pub fn add_virtual_input(&mut self, label: String, digest: String) {
        self.inputs.push(FileDigest {
            path: label,
            sha256: digest,
        });
    }

    /// Writes the resolved config and remembers its digest.
    pub fn write_config(&mut self, toml: &str, seed: u64) -> Result<()> {
        self.config_digest = Some(sha256_hex(toml.as_bytes()));
        self.seed = Some(seed);
        self.write(RESOLVED_CONFIG_FILE, toml)?;
        Ok(())
    }

    pub fn finish(self) -> Result<RunManifest> {
        let outputs = self
            .written
            .iter()
            .map(|rel| FileDigest::of(&self.root.join(rel), rel.clone()))
            .collect::<Result<_>>()?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            config_digest: self.config_digest,
            seed: self.seed,
            threads: rayon::current_num_threads(),
            started_at: self.started_at,
            finished_at: timestamp(),
            inputs: self.inputs,
            outputs,
        };
        let path = self.root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

//! Artifact files: each written through a temporary name and renamed into
//! place, with the manifest last.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{to_toml, ExperimentConfig};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.partial"));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// One named output held in memory until the scenario completes.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            name: name.into(),
            bytes: bytes.into(),
        }
    }

    /// One JSON object per line.
    pub fn json_lines<T: Serialize>(name: impl Into<String>, rows: &[T]) -> Result<Self> {
        let mut s = String::new();
        for r in rows {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(Self::new(name, s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Everything needed to rerun a scenario and check that the outputs match.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Full configuration with defaults filled in.
    pub config: String,
    pub outputs: Vec<OutputEntry>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, artifacts: &[Artifact]) -> Self {
        let config = to_toml(&cfg.clone().resolved());
        Self {
            tool: "qlink".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            scenario: cfg.scenario.name().into(),
            seed: cfg.seed,
            config_sha256: sha256_hex(config.as_bytes()),
            config,
            outputs: artifacts
                .iter()
                .map(|a| OutputEntry {
                    file: a.name.clone(),
                    bytes: a.bytes.len(),
                    sha256: sha256_hex(&a.bytes),
                })
                .collect(),
        }
    }
}

/// Writes the artifacts into `dir` in parallel, then the manifest.
pub fn emit(dir: &Path, cfg: &ExperimentConfig, artifacts: &[Artifact]) -> Result<PathBuf> {
    use rayon::prelude::*;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    artifacts.par_iter().try_for_each(|a| write_atomic(&dir.join(&a.name), &a.bytes))?;
    let manifest = Manifest::new(cfg, artifacts);
    let path = dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

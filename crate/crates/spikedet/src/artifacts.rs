//! Append-only artifact directories and their manifest.
//!
//! Every command computes its outputs fully in memory, then commits them in one
//! step: all targets are checked for absence before anything is written, each
//! file lands through a temporary name plus rename, and the manifest gains one
//! entry per file with its SHA-256 digest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spikedet_core::experiment::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub stage: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputDigest>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
}

/// What a sweep needs to be re-run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub seed: u64,
    pub noise_levels: Vec<f64>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentManifest>,
    #[serde(default)]
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn entry(&self, rel: &str) -> Option<&ArtifactEntry> {
        self.artifacts.iter().find(|e| e.path == rel)
    }
}

/// One file to be committed.
pub struct Artifact {
    pub rel: PathBuf,
    pub bytes: Vec<u8>,
    pub params: serde_json::Value,
}

impl Artifact {
    pub fn new(rel: impl Into<PathBuf>, bytes: Vec<u8>) -> Self {
        Self {
            rel: rel.into(),
            bytes,
            params: serde_json::Value::Null,
        }
    }

    pub fn with_params(mut self, params: serde_json::Value) -> Self {
        self.params = params;
        self
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().context("artifact path has no file name")?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res.with_context(|| format!("writing {}", path.display()))
}

fn rel_string(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Writes `artifacts` under `dir` and records them in `dir/manifest.json`.
///
/// Fails without touching the disk if any target already exists.
pub fn commit(
    dir: &Path,
    stage: &str,
    inputs: &[InputDigest],
    experiment: Option<&ExperimentManifest>,
    artifacts: &[Artifact],
) -> Result<Vec<ArtifactEntry>> {
    for a in artifacts {
        if a.rel.is_absolute() || a.rel.components().any(|c| c.as_os_str() == "..") {
            bail!("artifact path {} must stay inside {}", a.rel.display(), dir.display());
        }
        if rel_string(&a.rel) == MANIFEST_FILE {
            bail!("{MANIFEST_FILE} is reserved");
        }
        let path = dir.join(&a.rel);
        if path.exists() {
            bail!("refusing to overwrite existing artifact {}", path.display());
        }
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest = if manifest_path.exists() {
        Manifest::load(&manifest_path)?
    } else {
        Manifest::default()
    };
    if let Some(exp) = experiment {
        match &manifest.experiment {
            Some(old) if old != exp => bail!(
                "{} already describes a different experiment",
                manifest_path.display()
            ),
            _ => manifest.experiment = Some(exp.clone()),
        }
    }
    let mut entries = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        write_atomic(&path, &a.bytes)?;
        entries.push(ArtifactEntry {
            path: rel_string(&a.rel),
            sha256: sha256_hex(&a.bytes),
            bytes: a.bytes.len() as u64,
            stage: stage.to_owned(),
            inputs: inputs.to_vec(),
            params: a.params.clone(),
        });
    }
    manifest.artifacts.extend(entries.iter().cloned());
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&manifest_path, &json)?;
    Ok(entries)
}

/// Checks every manifest entry against the file on disk.
pub fn verify(dir: &Path) -> Result<()> {
    let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
    for e in &manifest.artifacts {
        let path = dir.join(&e.path);
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        if sha256_hex(&bytes) != e.sha256 {
            bail!("digest mismatch for {}", path.display());
        }
    }
    Ok(())
}

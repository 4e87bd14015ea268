//! Run manifest, rewritten after every stage. Output files are declared in
//! the manifest before they are created.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use varfrac::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub name: String,
    /// `running`, `ok` or `failed`.
    pub status: String,
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    pub config_sha256: String,
    pub version: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn code_version() -> String {
    format!("varfrac-cli {}", env!("CARGO_PKG_VERSION"))
}

/// Output directory plus its manifest.
pub struct Run {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl Run {
    pub fn create(dir: &Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let run = Run {
            dir: dir.to_path_buf(),
            manifest,
        };
        run.save()?;
        Ok(run)
    }

    pub fn hash(&self) -> &str {
        &self.manifest.config_sha256
    }

    fn save(&self) -> Result<()> {
        let text = toml::to_string(&self.manifest).map_err(|e| Error::config(format!("manifest: {e}")))?;
        fs::write(self.dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Declares `outputs`, saves the manifest, runs `body` and records its
    /// status and wall time.
    pub fn stage<T>(&mut self, name: &str, outputs: &[&str], body: impl FnOnce(&Run) -> Result<T>) -> Result<T> {
        self.manifest.stages.push(StageRecord {
            name: name.to_string(),
            status: "running".into(),
            wall_seconds: 0.0,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        });
        self.save()?;
        let start = Instant::now();
        let out = body(self);
        let rec = self.manifest.stages.last_mut().expect("stage just pushed");
        rec.wall_seconds = start.elapsed().as_secs_f64();
        rec.status = if out.is_ok() { "ok" } else { "failed" }.into();
        self.save()?;
        out
    }

    /// Path of an output file; it must be declared by the current stage.
    pub fn output(&self, name: &str) -> PathBuf {
        let declared = self
            .manifest
            .stages
            .last()
            .is_some_and(|s| s.outputs.iter().any(|o| o == name));
        assert!(declared, "output {name} was not declared in the manifest");
        self.dir.join(name)
    }
}

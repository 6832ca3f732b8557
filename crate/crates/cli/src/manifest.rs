//! `run.json`, written next to every output so a run can be identified and
//! repeated.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use symmode::pipeline::Timing;

#[derive(Debug, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub timings: Vec<StageTime>,
    /// Hex SHA-256 of each input file's bytes, keyed by path.
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: Value) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            timings: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.push(InputHash {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn timings(&mut self, timings: &[Timing]) {
        self.timings.extend(timings.iter().map(|t| StageTime {
            stage: t.stage.to_string(),
            seconds: t.seconds,
        }));
    }

    /// Writes `run.json` into the directory holding `primary`.
    pub fn write_beside(&self, primary: &Path) -> std::io::Result<PathBuf> {
        let dir = primary.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let path = dir.join("run.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text)?;
        Ok(path)
    }
}

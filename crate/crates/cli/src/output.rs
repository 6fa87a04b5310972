//! Output directories and run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub version: String,
    /// sha256 of every other file written, keyed by relative path.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files collected in memory and written in one go.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn add(&mut self, file: OutputFile) {
        self.files.push(file);
    }

    pub fn add_json<T: Serialize>(&mut self, path: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
        bytes.push(b'\n');
        self.add(OutputFile { path: PathBuf::from(path), bytes });
        Ok(())
    }

    /// Writes every file plus `manifest.json`.
    pub fn write(mut self, command: &str, config_bytes: &[u8], seeds: &[u64]) -> CliResult<()> {
        let files = self
            .files
            .iter()
            .map(|f| (f.path.to_string_lossy().replace('\\', "/"), sha256_hex(&f.bytes)))
            .collect();
        let manifest = Manifest {
            command: command.into(),
            config_sha256: sha256_hex(config_bytes),
            seeds: seeds.to_vec(),
            version: env!("CARGO_PKG_VERSION").into(),
            files,
        };
        self.add_json("manifest.json", &manifest)?;
        if self.dir.exists() && !self.dir.is_dir() {
            return Err(CliError::Data(format!("{} exists and is not a directory", self.dir.display())));
        }
        let io = |p: &Path, e: std::io::Error| CliError::Data(format!("cannot write {}: {e}", p.display()));
        for f in &self.files {
            let path = self.dir.join(&f.path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
            }
            std::fs::write(&path, &f.bytes).map_err(|e| io(&path, e))?;
        }
        Ok(())
    }
}

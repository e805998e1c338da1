use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_error(stage: &'static str, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Pipeline {
        stage,
        message: format!("{}: {e}", path.display()),
    }
}

/// Artifacts of one run, held in memory until every stage has succeeded.
pub struct Outputs {
    dir: PathBuf,
    inputs: Vec<FileHash>,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            inputs: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Records the hash of an input that was read successfully.
    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256: sha256(bytes),
        });
    }

    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }

    /// Writes every file, then the manifest, each through a temp file and rename.
    pub fn commit(self, command: &str, config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| io_error("write", &self.dir, e))?;
        let mut outputs = Vec::new();
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            written.push(write_atomic(&self.dir.join(name), bytes)?);
            outputs.push(FileHash {
                path: name.clone(),
                sha256: sha256(bytes),
            });
        }
        let manifest = Manifest {
            command,
            config,
            inputs: self.inputs,
            outputs,
        };
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        written.push(write_atomic(&self.dir.join(MANIFEST), json.as_bytes())?);
        Ok(written)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error("write", dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error("write", path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error("write", path, e))?;
    tmp.persist(path).map_err(|e| io_error("write", path, e.error))?;
    Ok(path.to_path_buf())
}

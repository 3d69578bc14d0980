//! Atomic artifact writing with run manifests.
//!
//! Every artifact is written via temp file + rename and gets a
//! `<artifact>.manifest.json` beside it recording the subcommand, input
//! digests, seeds, semantic parameters, backend identities and a hash over
//! all of that. Output locations are deliberately excluded so two runs into
//! different directories stay byte-identical; a config-hash mismatch when
//! overwriting an existing artifact is detected and reported.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::errors::CliError;

/// An input is identified by file name plus content digest — directories are
/// environment-specific and would break run-to-run byte identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub inputs: Vec<InputRecord>,
    pub seeds: BTreeMap<String, u64>,
    pub params: BTreeMap<String, serde_json::Value>,
    pub backends: Vec<String>,
    pub config_hash: String,
}

/// Collects what a command run depends on, then writes artifacts with their
/// manifests.
#[derive(Debug, Default)]
pub struct RunContext {
    subcommand: String,
    inputs: Vec<InputRecord>,
    seeds: BTreeMap<String, u64>,
    params: BTreeMap<String, serde_json::Value>,
    backends: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunContext {
    pub fn new(subcommand: &str) -> Self {
        RunContext {
            subcommand: subcommand.to_string(),
            ..Default::default()
        }
    }

    /// Record (and digest) an input file.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Data(format!("cannot read input {}: {e}", path.display())))?;
        self.inputs.push(InputRecord {
            name: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn seed(&mut self, key: &str, value: u64) {
        self.seeds.insert(key.to_string(), value);
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.params.insert(
            key.to_string(),
            serde_json::to_value(value).expect("param serializes"),
        );
    }

    pub fn backends(&mut self, descriptions: Vec<String>) {
        self.backends = descriptions;
    }

    fn manifest(&self) -> RunManifest {
        let mut manifest = RunManifest {
            tool: "slavkit".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: self.subcommand.clone(),
            inputs: self.inputs.clone(),
            seeds: self.seeds.clone(),
            params: self.params.clone(),
            backends: self.backends.clone(),
            config_hash: String::new(),
        };
        let canonical = serde_json::to_vec(&manifest).expect("manifest serializes");
        manifest.config_hash = sha256_hex(&canonical);
        manifest
    }

    /// Write bytes atomically (temp file in the target directory + rename)
    /// and the manifest beside the artifact.
    pub fn write_artifact(&self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(path, bytes)?;
        self.write_manifest_beside(path)
    }

    /// Write only the manifest for an artifact produced by other means
    /// (index files written by the retrieval store, for example).
    pub fn write_manifest_beside(&self, artifact: &Path) -> Result<(), CliError> {
        let manifest = self.manifest();
        let manifest_path = manifest_path_for(artifact);
        if let Ok(existing) = std::fs::read_to_string(&manifest_path) {
            if let Ok(old) = serde_json::from_str::<RunManifest>(&existing) {
                if old.config_hash != manifest.config_hash {
                    eprintln!(
                        "note: {} was produced with config hash {}, overwriting with {}",
                        artifact.display(),
                        &old.config_hash[..12.min(old.config_hash.len())],
                        &manifest.config_hash[..12]
                    );
                }
            }
        }
        let mut body = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        body.push(b'\n');
        write_atomic(&manifest_path, &body)
    }
}

pub fn manifest_path_for(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Temp-file-plus-rename write in the destination directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Internal(format!("cannot create temp file in {}: {e}", dir.display())))?;
    tmp.write_all(bytes)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::Internal(format!("cannot persist {}: {e}", path.display())))?;
    Ok(())
}

/// Read a whole file as lines (no trailing newline entries).
pub fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(raw.lines().map(|l| l.to_string()).collect())
}

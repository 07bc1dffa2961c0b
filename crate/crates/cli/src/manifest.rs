//! Run manifests: everything needed to reproduce a command's outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Bumped whenever a change alters output bytes for an unchanged config.
pub const FORMAT_REVISION: &str = "ammfeelab-manifest/1";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub format_revision: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    /// Command line that regenerates the outputs from `config.resolved.toml`.
    pub reproduce: String,
    pub master_seed: u64,
    /// The full resolved configuration, as TOML.
    pub config: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> CliResult<FileDigest> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Collects written files relative to the output directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, relative: &str, contents: &[u8]) -> CliResult<PathBuf> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(FileDigest {
            path: relative.to_string(),
            sha256: sha256_hex(contents),
        });
        Ok(path)
    }

    /// Records a file some other code already wrote under the root.
    pub fn adopt(&mut self, relative: &str) -> CliResult<()> {
        let mut digest = digest_file(&self.root.join(relative))?;
        digest.path = relative.to_string();
        self.written.push(digest);
        Ok(())
    }

    pub fn finish(mut self, mut manifest: Manifest) -> CliResult<PathBuf> {
        manifest.outputs = std::mem::take(&mut self.written);
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

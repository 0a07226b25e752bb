//! Atomic file writes and hash-chained JSON artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// A persisted stage output together with the hashes of what produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub kind: String,
    pub format_version: u32,
    /// Input name to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub payload: T,
}

impl<T> Artifact<T> {
    pub fn input(&self, name: &str) -> Option<&str> {
        self.inputs.get(name).map(String::as_str)
    }

    /// Fails unless input `name` was recorded with hash `expected`.
    pub fn require_input(&self, name: &str, expected: &str) -> Result<()> {
        match self.input(name) {
            Some(h) if h == expected => Ok(()),
            Some(h) => Err(Error::ArtifactMismatch(format!(
                "{} artifact was built from {name} {}, current {name} is {}",
                self.kind,
                short(h),
                short(expected)
            ))),
            None => Err(Error::ArtifactMismatch(format!(
                "{} artifact does not record a {name} hash",
                self.kind
            ))),
        }
    }
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

/// Serializes, writes atomically, and returns the hash of the written bytes.
pub fn save_artifact<T: Serialize>(
    path: impl AsRef<Path>,
    kind: &str,
    inputs: BTreeMap<String, String>,
    payload: &T,
) -> Result<String> {
    let path = path.as_ref();
    let artifact = Artifact {
        kind: kind.to_string(),
        format_version: FORMAT_VERSION,
        inputs,
        payload,
    };
    let bytes = serde_json::to_vec(&artifact).map_err(|e| Error::ArtifactFormat {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_atomic(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// Loads an artifact and its hash. A missing file names the command that
/// produces it.
pub fn load_artifact<T: DeserializeOwned>(
    path: impl AsRef<Path>,
    kind: &str,
    produced_by: &'static str,
) -> Result<(Artifact<T>, String)> {
    let path = path.as_ref();
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingArtifact {
                path: path.to_path_buf(),
                command: produced_by,
            })
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    let format_err = |message: String| Error::ArtifactFormat {
        path: path.to_path_buf(),
        message,
    };
    let artifact: Artifact<T> =
        serde_json::from_slice(&bytes).map_err(|e| format_err(e.to_string()))?;
    if artifact.kind != kind {
        return Err(format_err(format!(
            "expected a {kind} artifact, found {}",
            artifact.kind
        )));
    }
    if artifact.format_version != FORMAT_VERSION {
        return Err(format_err(format!(
            "unsupported format version {}",
            artifact.format_version
        )));
    }
    Ok((artifact, sha256_hex(&bytes)))
}

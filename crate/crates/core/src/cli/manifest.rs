//! Run manifests: what was run, with which config, and digests of what it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::simulate::{write_atomic, DUMP_VERSION};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    pub outputs: Vec<Output>,
    pub wall_time: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the config as JSON with sorted keys and no whitespace, so
/// formatting and key order in the source file do not matter.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let value = serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?;
    let canonical = serde_json::to_string(&value).map_err(|e| Error::Config(e.to_string()))?;
    Ok(sha256_hex(canonical.as_bytes()))
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("tool".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("dump_format".to_string(), DUMP_VERSION.to_string()),
        ("manifest_format".to_string(), MANIFEST_VERSION.to_string()),
    ])
}

/// Digests the listed outputs (relative to `dir`) and writes the manifest atomically.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    config_hash: String,
    outputs: &[PathBuf],
    wall_time: f64,
) -> Result<RunManifest> {
    let outputs = outputs
        .iter()
        .map(|p| {
            let bytes = std::fs::read(dir.join(p)).map_err(|e| Error::io(dir.join(p), e))?;
            Ok(Output { path: p.clone(), sha256: sha256_hex(&bytes) })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        command: command.to_string(),
        config_hash,
        versions: versions(),
        outputs,
        wall_time,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every data artifact.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub command: String,
    pub spec_echo: Value,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub artifacts: Vec<Artifact>,
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Writes `data` to `path` and its manifest to `<path>.manifest.json`.
pub fn write_artifact(
    path: &Path,
    data: &str,
    command: &str,
    config_hash: &str,
    spec_echo: Value,
    started: String,
) -> Result<()> {
    fs::write(path, data).with_context(|| format!("writing {}", path.display()))?;
    let manifest = RunManifest {
        config_hash: config_hash.to_string(),
        command: command.to_string(),
        spec_echo,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: now(),
        artifacts: vec![Artifact {
            path: path.display().to_string(),
            sha256: sha256_hex(data.as_bytes()),
        }],
    };
    let mpath = manifest_path(path);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&mpath, text).with_context(|| format!("writing {}", mpath.display()))?;
    Ok(())
}

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Seeds;
use super::CliError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// One command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Seeds,
    pub versions: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// `manifest.json`: the latest entry per command.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub runs: BTreeMap<String, ManifestEntry>,
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("ccot".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("spec_schema".to_string(), crate::oracle::SPEC_SCHEMA_VERSION.to_string()),
        ("wire".to_string(), crate::protocol::wire::PROTOCOL.to_string()),
    ])
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn digest_file(dir: &Path, name: &str) -> Result<FileDigest, CliError> {
    let bytes = std::fs::read(dir.join(name)).map_err(|e| CliError::Data(format!("cannot read {name}: {e}")))?;
    Ok(FileDigest {
        path: name.to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

impl RunManifest {
    pub fn load(dir: &Path) -> Self {
        std::fs::read_to_string(dir.join("manifest.json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default()
    }

    pub fn record(dir: &Path, entry: ManifestEntry) -> Result<(), CliError> {
        let mut m = Self::load(dir);
        m.runs.insert(entry.command.clone(), entry);
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text + "\n")
            .map_err(|e| CliError::Data(format!("cannot write manifest.json: {e}")))
    }
}

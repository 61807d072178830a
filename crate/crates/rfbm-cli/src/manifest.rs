//! Run manifests: enough metadata to replay a run and verify its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

/// Written as `<output-stem>.manifest.json` next to the outputs. Replaying
/// the recorded argv (with a fresh `--out`) reproduces byte-identical
/// numeric payloads; `started_at` is metadata, not payload.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector after the program name.
    pub argv: Vec<String>,
    /// Resolved parameter values (after config merging).
    pub parameters: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    /// UTC, RFC 3339.
    pub started_at: String,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        argv: Vec<String>,
        parameters: BTreeMap<String, String>,
        seed: u64,
    ) -> Self {
        let started_at = time::OffsetDateTime::now_utc()
            .format(&time::format_description::well_known::Rfc3339)
            .unwrap_or_else(|_| "1970-01-01T00:00:00Z".into());
        Self {
            command: command.to_string(),
            argv,
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at,
            outputs: Vec::new(),
        }
    }

    /// Records a written file with its content digest.
    pub fn add_output(&mut self, path: &Path) -> std::io::Result<()> {
        let bytes = fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        self.outputs.push(OutputDigest {
            path: path.to_string_lossy().into_owned(),
            sha256: hex_string(&digest),
        });
        Ok(())
    }

    pub fn write(&self, stem: &Path) -> std::io::Result<PathBuf> {
        let path = manifest_path(stem);
        fs::write(
            &path,
            serde_json::to_string_pretty(self).expect("manifest serializes"),
        )?;
        Ok(path)
    }
}

pub fn manifest_path(stem: &Path) -> PathBuf {
    let mut name = stem.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    stem.with_file_name(name)
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

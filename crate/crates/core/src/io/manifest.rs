//! Run manifests.
//!
//! The manifest hash covers the deterministic part of a run (command,
//! resolved configuration, version, provenance, input hashes) and not the
//! wall clock. Every result file carries it; [`RunManifest::verify`]
//! recomputes it and checks the listed files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::json::to_canonical_string;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    /// Method used by each operation of the run.
    pub provenance: BTreeMap<String, String>,
    /// sha256 of every input file read.
    pub input_hashes: BTreeMap<String, String>,
    pub hash: String,
    pub outputs: Vec<OutputFile>,
    pub wall_clock: Option<WallClock>,
}

#[derive(Serialize)]
struct Deterministic<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config: &'a Value,
    provenance: &'a BTreeMap<String, String>,
    input_hashes: &'a BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: Value,
        provenance: BTreeMap<String, String>,
        input_hashes: BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut m = Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            provenance,
            input_hashes,
            hash: String::new(),
            outputs: Vec::new(),
            wall_clock: None,
        };
        m.hash = m.compute_hash()?;
        Ok(m)
    }

    pub fn compute_hash(&self) -> Result<String> {
        let core = Deterministic {
            tool: &self.tool,
            version: &self.version,
            command: &self.command,
            config: &self.config,
            provenance: &self.provenance,
            input_hashes: &self.input_hashes,
        };
        Ok(sha256_hex(to_canonical_string(&core)?.as_bytes()))
    }

    pub fn record_output(&mut self, path: &str, contents: &[u8]) {
        self.outputs.push(OutputFile {
            path: path.into(),
            sha256: sha256_hex(contents),
        });
    }

    /// Recomputes the hash and checks every listed output against it.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        let expected = self.compute_hash()?;
        if expected != self.hash {
            return Err(Error::Manifest(format!(
                "recorded hash {} differs from recomputed {expected}",
                self.hash
            )));
        }
        for out in &self.outputs {
            let path = dir.join(&out.path);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let digest = sha256_hex(&bytes);
            if digest != out.sha256 {
                return Err(Error::Manifest(format!("{}: content hash {digest} != {}", out.path, out.sha256)));
            }
            if !embeds_hash(&bytes, &self.hash) {
                return Err(Error::Manifest(format!("{} does not reference manifest {}", out.path, self.hash)));
            }
        }
        Ok(())
    }
}

/// JSON outputs carry a top-level `manifest` field, CSV outputs a
/// `# manifest=` first line.
fn embeds_hash(bytes: &[u8], hash: &str) -> bool {
    let Ok(text) = std::str::from_utf8(bytes) else {
        return false;
    };
    if let Some(first) = text.lines().next() {
        if let Some(h) = first.strip_prefix("# manifest=") {
            return h == hash;
        }
    }
    serde_json::from_str::<Value>(text)
        .ok()
        .and_then(|v| v.get("manifest").and_then(Value::as_str).map(|h| h == hash))
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn manifest() -> RunManifest {
        RunManifest::new("betti", json!({"weights": [1, 2]}), BTreeMap::new(), BTreeMap::new()).unwrap()
    }

    #[test]
    fn hash_ignores_wall_clock() {
        let mut a = manifest();
        a.wall_clock = Some(WallClock {
            started_unix: 1.0,
            elapsed_seconds: 2.0,
        });
        assert_eq!(a.compute_hash().unwrap(), manifest().hash);
    }

    #[test]
    fn config_changes_hash() {
        let b = RunManifest::new("betti", json!({"weights": [1, 3]}), BTreeMap::new(), BTreeMap::new()).unwrap();
        assert_ne!(b.hash, manifest().hash);
    }

    #[test]
    fn verify_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest();
        let body = format!("# manifest={}\nm\n1\n", m.hash);
        std::fs::write(dir.path().join("t.csv"), &body).unwrap();
        m.record_output("t.csv", body.as_bytes());
        m.verify(dir.path()).unwrap();
        std::fs::write(dir.path().join("t.csv"), body.replace("\n1\n", "\n2\n")).unwrap();
        assert!(matches!(m.verify(dir.path()), Err(Error::Manifest(_))));
    }
}

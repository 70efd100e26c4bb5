//! Content-addressed result cache.
//!
//! Entries live in the directory named by `BGCOH_CACHE_DIR`, one file per
//! key, each wrapping its payload with the payload's sha256. Writes go
//! through a temporary file and a rename. Entries that fail to parse or
//! whose checksum does not match are deleted and reported as misses.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::json::{to_canonical_string, to_pretty_string};
use crate::io::manifest::sha256_hex;

pub const CACHE_ENV: &str = "BGCOH_CACHE_DIR";

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    sha256: String,
    payload: String,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    /// The cache named by the environment, if any.
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Self::new(PathBuf::from(dir)).map(Some),
            _ => Ok(None),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// `sha256(operation \n canonical config)`.
    pub fn key(operation: &str, config: &Value) -> Result<String> {
        let text = format!("{operation}\n{}", to_canonical_string(config)?);
        Ok(sha256_hex(text.as_bytes()))
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// The stored payload, or `None` on a miss.
    pub fn load(&self, key: &str) -> Result<Option<String>> {
        let path = self.path(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                self.evict(&path)?;
                return Ok(None);
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        match serde_json::from_str::<Entry>(&text) {
            Ok(entry) if entry.key == key && entry.sha256 == sha256_hex(entry.payload.as_bytes()) => {
                Ok(Some(entry.payload))
            }
            _ => {
                self.evict(&path)?;
                Ok(None)
            }
        }
    }

    pub fn store(&self, key: &str, payload: &str) -> Result<()> {
        let entry = Entry {
            key: key.into(),
            sha256: sha256_hex(payload.as_bytes()),
            payload: payload.into(),
        };
        let text = to_pretty_string(&entry)?;
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        let path = self.path(key);
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    fn evict(&self, path: &Path) -> Result<()> {
        match std::fs::remove_file(path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

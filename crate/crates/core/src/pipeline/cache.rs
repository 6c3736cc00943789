//! Content-addressed store of stage outputs. Each entry is keyed by a
//! SHA-256 over the stage name, its upstream key and the settings it
//! depends on; changing anything upstream changes every downstream key.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct StageCache {
    dir: PathBuf,
    reuse: bool,
}

/// Hex digest of a stage name and its inputs.
pub fn stage_key(stage: &str, parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Digest of a file, or of every file below a directory in name order.
pub fn content_key(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    let mut files = Vec::new();
    if path.is_dir() {
        let mut stack = vec![path.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir)? {
                let p = entry?.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.push(p);
                }
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    for f in files {
        let rel = f.strip_prefix(path).unwrap_or(&f).to_string_lossy().into_owned();
        h.update(rel.as_bytes());
        let bytes = fs::read(&f)?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

impl StageCache {
    /// Entries are always written; they are only read back when `reuse`.
    pub fn new(dir: PathBuf, reuse: bool) -> Self {
        Self { dir, reuse }
    }

    fn path(&self, stage: &str, key: &str) -> PathBuf {
        self.dir.join(format!("{stage}-{}.json", &key[..16]))
    }

    pub fn get<V: DeserializeOwned>(&self, stage: &str, key: &str) -> Result<Option<V>> {
        if !self.reuse {
            return Ok(None);
        }
        let path = self.path(stage, key);
        if !path.exists() {
            return Ok(None);
        }
        let (stored_key, value): (String, V) = serde_json::from_slice(&fs::read(path)?)?;
        Ok((stored_key == key).then_some(value))
    }

    pub fn put<V: Serialize>(&self, stage: &str, key: &str, value: &V) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        fs::write(self.path(stage, key), serde_json::to_vec(&(key, value))?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_depend_on_every_part() {
        let a = stage_key("train", &[b"x", b"y"]);
        assert_eq!(a, stage_key("train", &[b"x", b"y"]));
        assert_ne!(a, stage_key("train", &[b"xy"]));
        assert_ne!(a, stage_key("cluster", &[b"x", b"y"]));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn reuse_only_when_enabled() {
        let dir = tempfile::tempdir().unwrap();
        let key = stage_key("s", &[]);
        StageCache::new(dir.path().into(), false).put("s", &key, &vec![0.1f64, 1.0 / 3.0]).unwrap();
        assert_eq!(StageCache::new(dir.path().into(), false).get::<Vec<f64>>("s", &key).unwrap(), None);
        let back = StageCache::new(dir.path().into(), true).get::<Vec<f64>>("s", &key).unwrap();
        assert_eq!(back, Some(vec![0.1, 1.0 / 3.0]));
    }

    #[test]
    fn directory_digest_sees_contents() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a"), "1").unwrap();
        let k1 = content_key(dir.path()).unwrap();
        fs::write(dir.path().join("a"), "2").unwrap();
        assert_ne!(k1, content_key(dir.path()).unwrap());
    }
}

//! Content-addressed result cache.
//!
//! Entries live in `$FTN_CACHE` (default `$HOME/.cache/ftn`), one file per
//! key, named by the SHA-256 of the toolkit version, the command, the
//! canonical input and the effective configuration. Writes go to a
//! temporary file in the same directory and are renamed into place.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn disabled() -> Self {
        Cache { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: Some(dir.into()) }
    }

    /// `FTN_CACHE`, else `$HOME/.cache/ftn`, else disabled.
    pub fn from_env() -> Self {
        match std::env::var_os("FTN_CACHE") {
            Some(d) if !d.is_empty() => Cache::at(d),
            _ => std::env::var_os("HOME").map_or_else(Cache::disabled, |h| Cache::at(PathBuf::from(h).join(".cache").join("ftn"))),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.dir.is_some()
    }

    pub fn key(command: &str, input: &str, config: &str) -> String {
        let mut h = Sha256::new();
        for part in [ftn_core::VERSION, command, input, config] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        fs::read_to_string(self.path(key)?).ok()
    }

    pub fn put(&self, key: &str, contents: &str) -> io::Result<()> {
        let (Some(dir), Some(dest)) = (self.dir.as_ref(), self.path(key)) else {
            return Ok(());
        };
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{key}.{}.tmp", std::process::id()));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, &dest).inspect_err(|_| {
            let _ = fs::remove_file(&tmp);
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::at(dir.path().join("nested"));
        let key = Cache::key("decnorm", "{}", "{}");
        assert_eq!(key.len(), 64);
        assert!(cache.get(&key).is_none());
        cache.put(&key, "payload").unwrap();
        assert_eq!(cache.get(&key).as_deref(), Some("payload"));
        // No temporary files are left behind.
        let names: Vec<_> = fs::read_dir(dir.path().join("nested")).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn keys_separate_fields() {
        assert_ne!(Cache::key("a", "bc", ""), Cache::key("ab", "c", ""));
        assert_ne!(Cache::key("decnorm", "x", "1"), Cache::key("minnorm", "x", "1"));
    }

    #[test]
    fn disabled_cache_is_inert() {
        let cache = Cache::disabled();
        cache.put("k", "v").unwrap();
        assert!(cache.get("k").is_none());
    }
}

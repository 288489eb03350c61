//! Persistent response cache.
//!
//! One file per entry: the filename is the hex SHA-256 of the full prompt
//! (backend, model, both message texts, decoding parameters) and the content
//! is the raw assistant text. Keying on the prompt digest instead of the
//! case id means template or decoding changes invalidate naturally. Writes
//! go through a temp file and rename; cache IO problems degrade to
//! pass-through with a warning instead of failing the run.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{BackendError, ChatBackend, Completion};
use crate::ranker::PromptSpec;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Cache key for one chat call.
pub fn prompt_digest(backend_id: &str, model_id: &str, spec: &PromptSpec) -> String {
    let decoding = serde_json::to_string(&spec.decoding).expect("decoding serializes");
    let material = [
        "chat",
        backend_id,
        model_id,
        &spec.system_text,
        &spec.user_text,
        &decoding,
    ]
    .join("\x1f");
    sha256_hex(material.as_bytes())
}

/// Directory of digest-named entries.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        match fs::read_to_string(self.entry_path(key)) {
            Ok(text) => Some(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => {
                log::warn!("cache read failed for {key}: {e}");
                None
            }
        }
    }

    /// Store atomically: write a temp file, then rename into place.
    pub fn put(&self, key: &str, text: &str) {
        let result = (|| -> std::io::Result<()> {
            fs::create_dir_all(&self.dir)?;
            let tmp = self.dir.join(format!(".{key}.tmp"));
            fs::write(&tmp, text)?;
            fs::rename(&tmp, self.entry_path(key))
        })();
        if let Err(e) = result {
            log::warn!("cache write failed for {key}: {e}; continuing uncached");
        }
    }

    /// Remove every entry. Returns the number of files deleted.
    pub fn purge(&self) -> std::io::Result<usize> {
        let mut removed = 0;
        let entries = match fs::read_dir(&self.dir) {
            Ok(entries) => entries,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
            Err(e) => return Err(e),
        };
        for entry in entries {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                fs::remove_file(entry.path())?;
                removed += 1;
            }
        }
        Ok(removed)
    }
}

/// Memoizing decorator around any chat backend.
pub struct CachedBackend<B> {
    inner: B,
    cache: ResponseCache,
}

/// Wrap `inner` with a persistent cache at `dir`.
pub fn cached<B: ChatBackend>(inner: B, dir: impl Into<PathBuf>) -> CachedBackend<B> {
    CachedBackend {
        inner,
        cache: ResponseCache::new(dir),
    }
}

impl<B: ChatBackend> CachedBackend<B> {
    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }
}

impl<B: ChatBackend> ChatBackend for CachedBackend<B> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, spec: &PromptSpec) -> Result<Completion, BackendError> {
        let key = prompt_digest(self.inner.backend_id(), self.inner.model_id(), spec);
        if let Some(raw_text) = self.cache.get(&key) {
            return Ok(Completion::offline(raw_text));
        }
        let completion = self.inner.complete(spec)?;
        self.cache.put(&key, &completion.raw_text);
        Ok(completion)
    }
}

//! Persistent embedding cache.
//!
//! Layout inside the cache directory:
//!
//! * `vectors.log`: append-only records
//!   `u32 key_len | key (UTF-8) | u32 dim | dim × f64`, little-endian.
//! * `index.json`: snapshot of `key → offset` plus the log length it covers.
//!
//! Keys are `"{name}@{version}/d{dim}\x1f{text}"`, so vectors from different
//! embedder versions never share an entry. On open, records past the
//! snapshot are recovered by scanning the log tail; a torn final record is
//! truncated away.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use log::warn;
use serde::{Deserialize, Serialize};
use skillbench_core::{embed_batch, EmbedError, Embedder, EmbedderDescriptor, EmbeddingVector};

const LOG_FILE: &str = "vectors.log";
const INDEX_FILE: &str = "index.json";
const INDEX_FORMAT: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("embedding cache I/O at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: u32,
    log_len: u64,
    entries: BTreeMap<String, u64>,
}

struct LogState {
    file: File,
    len: u64,
    offsets: BTreeMap<String, u64>,
    dirty: bool,
}

pub struct EmbeddingCache {
    dir: PathBuf,
    vectors: RwLock<HashMap<String, EmbeddingVector>>,
    log: Mutex<LogState>,
}

pub fn cache_key(descriptor: &EmbedderDescriptor, text: &str) -> String {
    format!("{}\u{1f}{}", descriptor.namespace(), text)
}

fn encode(key: &str, v: &EmbeddingVector) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + key.len() + 8 * v.dim());
    buf.extend_from_slice(&(key.len() as u32).to_le_bytes());
    buf.extend_from_slice(key.as_bytes());
    buf.extend_from_slice(&(v.dim() as u32).to_le_bytes());
    for x in v.values() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf
}

/// Parses one record at `at`; returns it and the offset just past it.
fn decode(bytes: &[u8], at: usize) -> Option<(String, EmbeddingVector, usize)> {
    let u32_at = |p: usize| -> Option<u32> {
        Some(u32::from_le_bytes(bytes.get(p..p + 4)?.try_into().ok()?))
    };
    let key_len = u32_at(at)? as usize;
    let key_start = at + 4;
    let key = std::str::from_utf8(bytes.get(key_start..key_start + key_len)?).ok()?;
    let dim_at = key_start + key_len;
    let dim = u32_at(dim_at)? as usize;
    let data = bytes.get(dim_at + 4..dim_at + 4 + 8 * dim)?;
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let v = EmbeddingVector::new(values).ok()?;
    Some((key.to_string(), v, dim_at + 4 + 8 * dim))
}

impl EmbeddingCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, CacheError> {
        let dir = dir.as_ref().to_path_buf();
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CacheError::Io { path, source }
        };
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let log_path = dir.join(LOG_FILE);
        let bytes = match fs::read(&log_path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&log_path)(e)),
        };

        let mut vectors = HashMap::new();
        let mut offsets = BTreeMap::new();
        let mut scan_from = 0usize;
        if let Some(index) = Self::read_index(&dir) {
            if index.format == INDEX_FORMAT && index.log_len as usize <= bytes.len() {
                let mut ok = true;
                for (key, &off) in &index.entries {
                    match decode(&bytes, off as usize) {
                        Some((k, v, _)) if &k == key => {
                            vectors.insert(k, v);
                        }
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    offsets = index.entries;
                    scan_from = index.log_len as usize;
                } else {
                    warn!("{}: stale index, rescanning log", dir.display());
                    vectors.clear();
                }
            }
        }

        let mut at = scan_from;
        while at < bytes.len() {
            match decode(&bytes, at) {
                Some((k, v, next)) => {
                    offsets.insert(k.clone(), at as u64);
                    vectors.insert(k, v);
                    at = next;
                }
                None => break,
            }
        }

        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        if at < bytes.len() {
            warn!(
                "{}: dropping {} bytes of torn log tail",
                log_path.display(),
                bytes.len() - at
            );
            file.set_len(at as u64).map_err(io_err(&log_path))?;
        }
        Ok(Self {
            dir,
            vectors: RwLock::new(vectors),
            log: Mutex::new(LogState {
                file,
                len: at as u64,
                offsets,
                dirty: scan_from != at,
            }),
        })
    }

    fn read_index(dir: &Path) -> Option<IndexFile> {
        let bytes = fs::read(dir.join(INDEX_FILE)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.vectors.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, descriptor: &EmbedderDescriptor, text: &str) -> Option<EmbeddingVector> {
        self.vectors
            .read()
            .unwrap()
            .get(&cache_key(descriptor, text))
            .cloned()
    }

    /// Stores `v` unless the key is already present (values are idempotent,
    /// so the first writer wins).
    pub fn put(
        &self,
        descriptor: &EmbedderDescriptor,
        text: &str,
        v: &EmbeddingVector,
    ) -> Result<(), CacheError> {
        let key = cache_key(descriptor, text);
        let mut log = self.log.lock().unwrap();
        if log.offsets.contains_key(&key) {
            return Ok(());
        }
        let record = encode(&key, v);
        log.file
            .write_all(&record)
            .map_err(|source| CacheError::Io {
                path: self.dir.join(LOG_FILE),
                source,
            })?;
        let at = log.len;
        log.len += record.len() as u64;
        log.offsets.insert(key.clone(), at);
        log.dirty = true;
        // Publish before releasing the log lock so a concurrent put of the
        // same key cannot return before the vector is readable.
        self.vectors.write().unwrap().insert(key, v.clone());
        Ok(())
    }

    /// Syncs the log and rewrites the index snapshot.
    pub fn flush(&self) -> Result<(), CacheError> {
        let mut log = self.log.lock().unwrap();
        if !log.dirty {
            return Ok(());
        }
        let err = |path: PathBuf| move |source| CacheError::Io { path, source };
        log.file.sync_data().map_err(err(self.dir.join(LOG_FILE)))?;
        let index = IndexFile {
            format: INDEX_FORMAT,
            log_len: log.len,
            entries: log.offsets.clone(),
        };
        let tmp = self.dir.join("index.json.tmp");
        fs::write(&tmp, serde_json::to_vec(&index).expect("index serializes"))
            .map_err(err(tmp.clone()))?;
        fs::rename(&tmp, self.dir.join(INDEX_FILE)).map_err(err(self.dir.join(INDEX_FILE)))?;
        log.dirty = false;
        Ok(())
    }
}

impl Drop for EmbeddingCache {
    fn drop(&mut self) {
        if let Err(e) = self.flush() {
            warn!("{e}");
        }
    }
}

/// Write-through cache in front of another provider. Without a cache it is
/// a transparent pass-through.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: Option<Arc<EmbeddingCache>>,
    write_failed: AtomicBool,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E, cache: Option<Arc<EmbeddingCache>>) -> Self {
        Self {
            inner,
            cache,
            write_failed: AtomicBool::new(false),
        }
    }

    pub fn cache(&self) -> Option<&Arc<EmbeddingCache>> {
        self.cache.as_ref()
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn descriptor(&self) -> &EmbedderDescriptor {
        self.inner.descriptor()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let Some(cache) = &self.cache else {
            return embed_batch(&self.inner, texts);
        };
        let desc = self.inner.descriptor();
        let mut out: Vec<Option<EmbeddingVector>> =
            texts.iter().map(|t| cache.get(desc, t)).collect();
        let mut misses: Vec<&str> = Vec::new();
        for (t, v) in texts.iter().zip(&out) {
            if v.is_none() && !misses.contains(t) {
                misses.push(t);
            }
        }
        if !misses.is_empty() {
            let fresh = embed_batch(&self.inner, &misses)?;
            let fresh: HashMap<&str, EmbeddingVector> = misses.into_iter().zip(fresh).collect();
            for (t, v) in fresh.iter() {
                if let Err(e) = cache.put(desc, t, v) {
                    if !self.write_failed.swap(true, Ordering::Relaxed) {
                        warn!("{e}; continuing without persisting new vectors");
                    }
                }
            }
            for (slot, t) in out.iter_mut().zip(texts) {
                if slot.is_none() {
                    *slot = fresh.get(t).cloned();
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }
}

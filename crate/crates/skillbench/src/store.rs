//! Persisted extraction responses, so a run can resume and re-score without
//! calling adapters again.
//!
//! One JSONL file per (adapter name, dataset hash) under
//! `<cache>/extractions/`, one `{"response", "usage"}` object per line.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use skillbench_core::{ExtractionResponse, UsageRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredExtraction {
    pub response: ExtractionResponse,
    pub usage: UsageRecord,
}

/// Adapter names can hold anything; file names may not.
pub fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub struct ExtractionStore {
    path: PathBuf,
    entries: HashMap<String, StoredExtraction>,
    file: File,
}

impl ExtractionStore {
    pub fn path_for(cache_dir: &Path, adapter: &str, dataset_sha256: &str) -> PathBuf {
        let hash = &dataset_sha256[..dataset_sha256.len().min(16)];
        cache_dir
            .join("extractions")
            .join(format!("{}-{hash}.jsonl", file_safe(adapter)))
    }

    /// Loads existing entries. A malformed line (typically a torn final
    /// write) is skipped with a warning and the record is re-extracted.
    pub fn open(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut entries = HashMap::new();
        let mut torn = false;
        match File::open(&path) {
            Ok(f) => {
                for (n, line) in BufReader::new(f).lines().enumerate() {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<StoredExtraction>(&line) {
                        Ok(e) => {
                            entries.insert(e.response.id.key(), e);
                        }
                        Err(err) => {
                            warn!(
                                "{}:{}: ignoring stored extraction: {err}",
                                path.display(),
                                n + 1
                            );
                            torn = true;
                        }
                    }
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        if torn {
            // Rewrite so later appends do not follow a partial line.
            let mut f = io::BufWriter::new(File::create(&path)?);
            let mut ids: Vec<&String> = entries.keys().collect();
            ids.sort();
            for id in ids {
                serde_json::to_writer(&mut f, &entries[id])?;
                f.write_all(b"\n")?;
            }
            f.flush()?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            entries,
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id_key: &str) -> Option<&StoredExtraction> {
        self.entries.get(id_key)
    }

    pub fn append(&mut self, entry: StoredExtraction) -> io::Result<()> {
        let mut line = serde_json::to_vec(&entry)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.entries.insert(entry.response.id.key(), entry);
        Ok(())
    }
}

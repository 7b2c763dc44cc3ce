//! Dataset and predictions files.
//!
//! A dataset is a UTF-8 JSON array of
//! `{"id", "title", "desc", "values": [{"start", "end", "skill"}]}` objects.
//! Predictions are JSONL, one `{"id", "skills": [...]}` per line.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skillbench_core::{
    validate_records, CorpusError, SpanWarning, Strictness, VacancyId, VacancyRecord,
};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: malformed prediction line: {source}")]
    PredictionLine {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error("{path}: prediction for id {id} appears twice")]
    DuplicatePrediction { path: PathBuf, id: String },
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub path: PathBuf,
    pub records: Vec<VacancyRecord>,
    pub warnings: Vec<SpanWarning>,
    /// Hex SHA-256 of the file bytes.
    pub sha256: String,
}

impl Dataset {
    pub fn index(&self) -> HashMap<String, usize> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.key(), i))
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    strictness: Strictness,
) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let records: Vec<VacancyRecord> =
        serde_json::from_slice(&bytes).map_err(|source| DatasetError::Json {
            path: path.to_path_buf(),
            source,
        })?;
    let validated =
        validate_records(records, strictness).map_err(|source| DatasetError::Invalid {
            path: path.to_path_buf(),
            source,
        })?;
    for w in &validated.warnings {
        warn!("{}: {w}", path.display());
    }
    Ok(Dataset {
        path: path.to_path_buf(),
        records: validated.records,
        warnings: validated.warnings,
        sha256: sha256_hex(&bytes),
    })
}

/// Writes records back in the dataset format (pretty-printed).
pub fn save_dataset(path: impl AsRef<Path>, records: &[VacancyRecord]) -> std::io::Result<()> {
    let json = serde_json::to_vec_pretty(records).map_err(std::io::Error::other)?;
    fs::write(path, json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: VacancyId,
    #[serde(default)]
    pub skills: Vec<String>,
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionLine>, DatasetError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PredictionLine =
            serde_json::from_str(&line).map_err(|source| DatasetError::PredictionLine {
                path: path.to_path_buf(),
                line: n + 1,
                source,
            })?;
        if !seen.insert(p.id.key()) {
            return Err(DatasetError::DuplicatePrediction {
                path: path.to_path_buf(),
                id: p.id.key(),
            });
        }
        out.push(p);
    }
    Ok(out)
}

pub fn write_predictions(path: impl AsRef<Path>, lines: &[PredictionLine]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for l in lines {
        serde_json::to_writer(&mut f, l)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use skillbench_core::SkillSpan;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn lenient_fixture_keeps_records_drops_span() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "d.json",
            r#"[
              {"id": 1, "title": "a", "desc": "knows SQL well", "values": [{"start": 6, "end": 9, "skill": "SQL"}]},
              {"id": "two", "title": "b", "desc": "short", "values": [{"start": 0, "end": 50, "skill": "x"}]},
              {"id": 3, "title": "c", "desc": "python", "values": []}
            ]"#,
        );
        let d = load_dataset(&p, Strictness::Lenient).unwrap();
        assert_eq!(d.records.len(), 3);
        assert_eq!(d.warnings.len(), 1);
        assert!(d.records[1].values.is_empty());
        assert!(matches!(
            load_dataset(&p, Strictness::Strict),
            Err(DatasetError::Invalid {
                source: CorpusError::InvalidSpan { .. },
                ..
            })
        ));
    }

    #[test]
    fn errors_are_specific() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_dataset(dir.path().join("nope.json"), Strictness::Strict),
            Err(DatasetError::Io { .. })
        ));
        let bad = write(dir.path(), "bad.json", "[{");
        assert!(matches!(
            load_dataset(&bad, Strictness::Strict),
            Err(DatasetError::Json { .. })
        ));
        let dup = write(
            dir.path(),
            "dup.json",
            r#"[{"id":"a","desc":""},{"id":"a","desc":""}]"#,
        );
        let err = load_dataset(&dup, Strictness::Lenient).unwrap_err();
        assert!(err.to_string().contains("duplicate vacancy id a"), "{err}");
    }

    #[test]
    fn strict_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            VacancyRecord {
                id: 10.into(),
                title: "Бухгалтер".into(),
                desc: "ведение бухгалтерского учета".into(),
                values: vec![SkillSpan::new(0, 28, "ведение бухгалтерского учета")],
            },
            VacancyRecord {
                id: "x-1".into(),
                title: "".into(),
                desc: "Python; SQL".into(),
                values: vec![],
            },
        ];
        let p = dir.path().join("rt.json");
        save_dataset(&p, &records).unwrap();
        let first = load_dataset(&p, Strictness::Strict).unwrap();
        assert_eq!(first.records, records);
        let p2 = dir.path().join("rt2.json");
        save_dataset(&p2, &first.records).unwrap();
        assert_eq!(
            load_dataset(&p2, Strictness::Strict).unwrap().records,
            records
        );
    }

    #[test]
    fn predictions_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "p.jsonl",
            "{\"id\": 1, \"skills\": [\"a\"]}\n\n{\"id\": \"b\", \"skills\": []}\n",
        );
        let preds = load_predictions(&p).unwrap();
        assert_eq!(preds.len(), 2);
        assert_eq!(preds[0].id, VacancyId::Int(1));
        let dup = write(dir.path(), "d.jsonl", "{\"id\": 1}\n{\"id\": \"1\"}\n");
        assert!(matches!(
            load_predictions(&dup),
            Err(DatasetError::DuplicatePrediction { .. })
        ));
        let bad = write(dir.path(), "b.jsonl", "{\"id\": 1}\nnot json\n");
        assert!(matches!(
            load_predictions(&bad),
            Err(DatasetError::PredictionLine { line: 2, .. })
        ));
    }
}

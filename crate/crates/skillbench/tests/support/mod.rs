#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use skillbench::dataset::{save_dataset, write_predictions, PredictionLine};
use skillbench_core::{
    cosine_similarity, mock_embed, AdapterKind, AdapterManifest, SkillSpan, Transport, VacancyId,
    VacancyRecord,
};

pub fn mock_adapter_bin() -> &'static str {
    env!("CARGO_BIN_EXE_skillbench-mock-adapter")
}

pub fn cli_bin() -> &'static str {
    env!("CARGO_BIN_EXE_skillbench")
}

fn sh_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Subprocess manifest running the mock adapter with `args`.
pub fn mock_manifest(name: &str, args: &[&str]) -> AdapterManifest {
    let mut cmd = sh_quote(mock_adapter_bin());
    for a in args {
        cmd.push(' ');
        cmd.push_str(&sh_quote(a));
    }
    let mut m = AdapterManifest::new(name, AdapterKind::Ner, Transport::Subprocess, cmd);
    m.timeout_sec = 10.0;
    m
}

pub fn path_arg(p: &Path) -> String {
    p.to_str().expect("utf-8 temp path").to_string()
}

/// Lowercase pseudo-words; fresh ones share almost no trigrams.
pub fn word(rng: &mut StdRng, len: usize) -> String {
    (0..len)
        .map(|_| rng.random_range(b'a'..=b'z') as char)
        .collect()
}

/// Two-word skill string, unique by construction through `serial`.
pub fn fresh_skill(rng: &mut StdRng, serial: usize) -> String {
    format!("{} {}{}", word(rng, 6), word(rng, 5), serial)
}

/// A record whose description lists `skills`, with consistent spans.
pub fn record_with_skills(id: VacancyId, skills: &[String]) -> VacancyRecord {
    record_listing(id, skills, "Requirements: ")
}

pub fn record_listing(id: VacancyId, skills: &[String], prefix: &str) -> VacancyRecord {
    let mut desc = String::from(prefix);
    let mut values = Vec::new();
    for (i, s) in skills.iter().enumerate() {
        if i > 0 {
            desc.push_str("; ");
        }
        let start = desc.chars().count() as i64;
        desc.push_str(s);
        values.push(SkillSpan::new(
            start,
            start + s.chars().count() as i64,
            s.clone(),
        ));
    }
    desc.push('.');
    VacancyRecord {
        title: format!("Vacancy {id}"),
        id,
        desc,
        values,
    }
}

pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<VacancyRecord> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut serial = 0;
    (0..n)
        .map(|i| {
            let k = rng.random_range(1..=5);
            let skills: Vec<String> = (0..k)
                .map(|_| {
                    serial += 1;
                    fresh_skill(&mut rng, serial)
                })
                .collect();
            let id = if i % 2 == 0 {
                VacancyId::Int(i as i64)
            } else {
                VacancyId::Text(format!("v{i}"))
            };
            record_with_skills(id, &skills)
        })
        .collect()
}

pub fn write_corpus(dir: &Path, records: &[VacancyRecord]) -> PathBuf {
    let p = dir.join("dataset.json");
    save_dataset(&p, records).unwrap();
    p
}

pub fn write_prediction_file(path: &Path, preds: &[(VacancyId, Vec<String>)]) {
    let lines: Vec<PredictionLine> = preds
        .iter()
        .map(|(id, skills)| PredictionLine {
            id: id.clone(),
            skills: skills.clone(),
        })
        .collect();
    write_predictions(path, &lines).unwrap();
}

pub fn sim(a: &str, b: &str) -> f64 {
    cosine_similarity(&mock_embed(a), &mock_embed(b)).unwrap()
}

/// Per-vacancy counts the fixture was built to produce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Planted {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

pub struct PlantedFixture {
    pub records: Vec<VacancyRecord>,
    pub predictions: HashMap<String, Vec<String>>,
    pub planted: Vec<Planted>,
}

/// Builds vacancies where each planted true positive is a near-variant of
/// its gold skill (similarity at or above `threshold`) and every other
/// prediction/gold pair stays below it, so any maximum one-to-one matching
/// has exactly the planted cardinality.
pub fn planted_fixture(seed: u64, vacancies: usize, threshold: f64) -> PlantedFixture {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut serial = 0usize;
    let mut records = Vec::new();
    let mut predictions = HashMap::new();
    let mut planted = Vec::new();
    for v in 0..vacancies {
        let p = Planted {
            tp: rng.random_range(0..=4),
            fp: rng.random_range(0..=3),
            fn_: rng.random_range(0..=3),
        };
        let (gold, pred) = loop {
            let gold: Vec<String> = (0..p.tp + p.fn_)
                .map(|_| {
                    serial += 1;
                    fresh_skill(&mut rng, serial)
                })
                .collect();
            let mut pred: Vec<String> = gold[..p.tp as usize]
                .iter()
                .map(|g| format!("{g} {}", word(&mut rng, 1)))
                .collect();
            for _ in 0..p.fp {
                serial += 1;
                pred.push(fresh_skill(&mut rng, serial));
            }
            let ok = pred.iter().enumerate().all(|(i, pr)| {
                gold.iter().enumerate().all(|(j, g)| {
                    let s = sim(pr, g);
                    if i == j && (i as u64) < p.tp {
                        s >= threshold
                    } else {
                        s < threshold
                    }
                })
            });
            if ok {
                break (gold, pred);
            }
        };
        let id = VacancyId::Int(v as i64);
        predictions.insert(id.key(), pred);
        records.push(record_with_skills(id, &gold));
        planted.push(p);
    }
    PlantedFixture {
        records,
        predictions,
        planted,
    }
}

/// Straight from the definitions, sharing no code with the harness.
pub mod reference {
    use super::Planted;

    fn div(a: u64, b: u64) -> f64 {
        if b == 0 {
            0.0
        } else {
            a as f64 / b as f64
        }
    }

    /// (accuracy_jaccard, accuracy_recall_compat, f1, precision, recall)
    pub fn one(c: Planted) -> [f64; 5] {
        let p = div(c.tp, c.tp + c.fp);
        let r = div(c.tp, c.tp + c.fn_);
        let f = if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
        [div(c.tp, c.tp + c.fp + c.fn_), r, f, p, r]
    }

    pub fn micro(cs: &[Planted]) -> [f64; 5] {
        let total = cs.iter().fold(
            Planted {
                tp: 0,
                fp: 0,
                fn_: 0,
            },
            |a, b| Planted {
                tp: a.tp + b.tp,
                fp: a.fp + b.fp,
                fn_: a.fn_ + b.fn_,
            },
        );
        one(total)
    }

    pub fn macro_(cs: &[Planted]) -> [f64; 5] {
        let mut out = [0.0; 5];
        for c in cs {
            for (o, x) in out.iter_mut().zip(one(*c)) {
                *o += x;
            }
        }
        out.map(|x| x / cs.len() as f64)
    }
}

//! Span-annotated vacancy records and their validation.
//!
//! Character offsets count Unicode scalar values, not bytes. Spans are
//! advisory: scoring runs on the `skill` strings, and
//! [`span_consistency_report`] only flags spans whose text disagrees with
//! the description.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use serde::{Deserialize, Serialize};

/// Vacancy identifier as it appears in the dataset: either a string or an
/// integer. Equality for uniqueness checks and lookups goes through
/// [`VacancyId::key`], so `5` and `"5"` are the same vacancy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VacancyId {
    Int(i64),
    Text(String),
}

impl VacancyId {
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for VacancyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VacancyId::Int(v) => write!(f, "{v}"),
            VacancyId::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for VacancyId {
    fn from(s: &str) -> Self {
        VacancyId::Text(s.into())
    }
}

impl From<i64> for VacancyId {
    fn from(v: i64) -> Self {
        VacancyId::Int(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSpan {
    pub start: i64,
    pub end: i64,
    pub skill: String,
}

/// Why a span fails its invariants.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpanViolation {
    #[error("negative start offset {start}")]
    NegativeStart { start: i64 },
    #[error("empty or inverted range [{start}, {end})")]
    EmptyRange { start: i64, end: i64 },
    #[error("end offset {end} exceeds description length {len}")]
    OutOfBounds { end: i64, len: usize },
    #[error("skill text is empty")]
    EmptySkill,
}

impl SkillSpan {
    pub fn new(start: i64, end: i64, skill: impl Into<String>) -> Self {
        Self {
            start,
            end,
            skill: skill.into(),
        }
    }

    /// Checks the span against a description of `desc_chars` characters.
    pub fn check(&self, desc_chars: usize) -> Result<(), SpanViolation> {
        if self.start < 0 {
            return Err(SpanViolation::NegativeStart { start: self.start });
        }
        if self.start >= self.end {
            return Err(SpanViolation::EmptyRange {
                start: self.start,
                end: self.end,
            });
        }
        if self.end as u64 > desc_chars as u64 {
            return Err(SpanViolation::OutOfBounds {
                end: self.end,
                len: desc_chars,
            });
        }
        if self.skill.trim().is_empty() {
            return Err(SpanViolation::EmptySkill);
        }
        Ok(())
    }

    /// Character range, if the offsets are non-negative and ordered.
    pub fn char_range(&self) -> Option<Range<usize>> {
        if self.start < 0 || self.start >= self.end {
            return None;
        }
        Some(self.start as usize..self.end as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VacancyRecord {
    pub id: VacancyId,
    #[serde(default)]
    pub title: String,
    pub desc: String,
    #[serde(default)]
    pub values: Vec<SkillSpan>,
}

impl VacancyRecord {
    pub fn desc_chars(&self) -> usize {
        self.desc.chars().count()
    }

    /// Substring of `desc` by character range, or `None` past the end.
    pub fn desc_slice(&self, range: Range<usize>) -> Option<&str> {
        if range.start > range.end {
            return None;
        }
        let mut bounds = self
            .desc
            .char_indices()
            .map(|(i, _)| i)
            .chain(core::iter::once(self.desc.len()));
        let start = bounds.nth(range.start)?;
        let end = match range.end - range.start {
            0 => start,
            width => bounds.nth(width - 1)?,
        };
        Some(&self.desc[start..end])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

/// A span dropped in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanWarning {
    pub vacancy_id: VacancyId,
    pub span_index: usize,
    pub violation: SpanViolation,
}

impl fmt::Display for SpanWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "vacancy {}: span #{} dropped: {}",
            self.vacancy_id, self.span_index, self.violation
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("duplicate vacancy id {0}")]
    DuplicateId(String),
    #[error("vacancy {vacancy_id}: span #{span_index}: {violation}")]
    InvalidSpan {
        vacancy_id: String,
        span_index: usize,
        violation: SpanViolation,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub records: Vec<VacancyRecord>,
    pub warnings: Vec<SpanWarning>,
}

/// Enforces record invariants. Duplicate ids are always fatal; span
/// violations are fatal in strict mode and dropped (with a warning) in
/// lenient mode.
pub fn validate_records(
    records: Vec<VacancyRecord>,
    strictness: Strictness,
) -> Result<Validated, CorpusError> {
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert(r.id.key()) {
            return Err(CorpusError::DuplicateId(r.id.key()));
        }
    }

    let mut warnings = Vec::new();
    let mut out = Vec::with_capacity(records.len());
    for mut record in records {
        let len = record.desc_chars();
        let mut kept = Vec::with_capacity(record.values.len());
        for (span_index, span) in record.values.into_iter().enumerate() {
            match span.check(len) {
                Ok(()) => kept.push(span),
                Err(violation) => match strictness {
                    Strictness::Strict => {
                        return Err(CorpusError::InvalidSpan {
                            vacancy_id: record.id.key(),
                            span_index,
                            violation,
                        })
                    }
                    Strictness::Lenient => warnings.push(SpanWarning {
                        vacancy_id: record.id.clone(),
                        span_index,
                        violation,
                    }),
                },
            }
        }
        record.values = kept;
        out.push(record);
    }
    Ok(Validated {
        records: out,
        warnings,
    })
}

/// Deduplication rule for skill strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dedupe {
    Exact,
    #[default]
    CaseFold,
}

impl Dedupe {
    pub fn key(self, trimmed: &str) -> String {
        match self {
            Dedupe::Exact => trimmed.to_string(),
            Dedupe::CaseFold => trimmed.to_lowercase(),
        }
    }

    /// Trims, drops empties and removes repeats, keeping the first surface
    /// form of each.
    pub fn apply<'a, I>(self, items: I) -> Vec<String>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for item in items {
            let t = item.trim();
            if t.is_empty() {
                continue;
            }
            if seen.insert(self.key(t)) {
                out.push(t.to_string());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSkillSet {
    pub vacancy_id: VacancyId,
    pub skills: Vec<String>,
}

pub fn gold_skills(record: &VacancyRecord, dedupe: Dedupe) -> GoldSkillSet {
    GoldSkillSet {
        vacancy_id: record.id.clone(),
        skills: dedupe.apply(record.values.iter().map(|v| v.skill.as_str())),
    }
}

/// A span whose description text differs from its `skill` string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanMismatch {
    pub vacancy_id: VacancyId,
    pub span_index: usize,
    pub skill: String,
    pub found: String,
}

impl fmt::Display for SpanMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "vacancy {}: span #{} skill {:?} but desc has {:?}",
            self.vacancy_id, self.span_index, self.skill, self.found
        )
    }
}

pub fn span_consistency_report(record: &VacancyRecord) -> Vec<SpanMismatch> {
    let mut notes = Vec::new();
    for (span_index, span) in record.values.iter().enumerate() {
        let found = span
            .char_range()
            .and_then(|r| record.desc_slice(r))
            .unwrap_or("");
        if found.trim() != span.skill.trim() {
            notes.push(SpanMismatch {
                vacancy_id: record.id.clone(),
                span_index,
                skill: span.skill.clone(),
                found: found.to_string(),
            });
        }
    }
    notes
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub records: usize,
    pub spans: usize,
    pub mean_skills_per_record: f64,
}

pub fn dataset_stats(records: &[VacancyRecord]) -> DatasetStats {
    let spans: usize = records.iter().map(|r| r.values.len()).sum();
    let mean = if records.is_empty() {
        0.0
    } else {
        spans as f64 / records.len() as f64
    };
    DatasetStats {
        records: records.len(),
        spans,
        mean_skills_per_record: mean,
    }
}

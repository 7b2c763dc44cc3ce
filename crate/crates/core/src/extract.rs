//! Adapter manifests, the line-oriented wire protocol, LLM output parsing,
//! prompt rendering and per-request cost accounting.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dedupe, VacancyId, VacancyRecord};

/// Value of the `protocol` field in an adapter handshake.
pub const PROTOCOL_VERSION: &str = "skillbench/1";

/// Token replaced by the vacancy description in prompt templates.
pub const PROMPT_PLACEHOLDER: &str = "[*job description*]";

/// Default extraction prompt (English).
pub const DEFAULT_PROMPT: &str = include_str!("../resources/prompt_en.txt");

/// Russian rendering of [`DEFAULT_PROMPT`] for Russian-language models.
pub const DEFAULT_PROMPT_RU: &str = include_str!("../resources/prompt_ru.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Ner,
    Llm,
}

impl AdapterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdapterKind::Ner => "ner",
            AdapterKind::Llm => "llm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    #[default]
    Subprocess,
    Http,
}

/// USD per one million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pricing {
    pub input_per_million: f64,
    pub output_per_million: f64,
}

impl Pricing {
    /// `(tokens_in · price_in + tokens_out · price_out) / 1e6`.
    pub fn cost(&self, tokens_in: u64, tokens_out: u64) -> f64 {
        (tokens_in as f64 * self.input_per_million + tokens_out as f64 * self.output_per_million)
            / 1e6
    }
}

fn default_timeout() -> f64 {
    120.0
}

fn default_retries() -> u32 {
    2
}

/// How to reach one extraction system.
///
/// `endpoint` is a shell command line for subprocess adapters and a base
/// URL for HTTP adapters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterManifest {
    pub name: String,
    pub kind: AdapterKind,
    #[serde(default)]
    pub transport: Transport,
    #[serde(alias = "command")]
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_size_params: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_out: Option<f64>,
    /// Per-request timeout.
    #[serde(default = "default_timeout")]
    pub timeout_sec: f64,
    /// Extra attempts after the first failure of a record.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ManifestError {
    #[error("adapter name is empty")]
    EmptyName,
    #[error("adapter {0}: endpoint/command is empty")]
    EmptyEndpoint(String),
    #[error("adapter {0}: cost reporting needs both price_in and price_out")]
    PartialPricing(String),
    #[error("adapter {0}: prices must be finite and non-negative")]
    BadPrice(String),
    #[error("adapter {0}: model_size_params must be positive")]
    BadSize(String),
    #[error("adapter {0}: timeout_sec must be positive")]
    BadTimeout(String),
}

impl AdapterManifest {
    pub fn new(
        name: impl Into<String>,
        kind: AdapterKind,
        transport: Transport,
        endpoint: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            transport,
            endpoint: endpoint.into(),
            model_size_params: None,
            price_in: None,
            price_out: None,
            timeout_sec: default_timeout(),
            max_retries: default_retries(),
        }
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let name = || self.name.clone();
        if self.name.trim().is_empty() {
            return Err(ManifestError::EmptyName);
        }
        if self.endpoint.trim().is_empty() {
            return Err(ManifestError::EmptyEndpoint(name()));
        }
        match (self.price_in, self.price_out) {
            (Some(a), Some(b)) => {
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                    return Err(ManifestError::BadPrice(name()));
                }
            }
            (None, None) => {}
            _ => return Err(ManifestError::PartialPricing(name())),
        }
        if self.model_size_params == Some(0) {
            return Err(ManifestError::BadSize(name()));
        }
        if !(self.timeout_sec.is_finite() && self.timeout_sec > 0.0) {
            return Err(ManifestError::BadTimeout(name()));
        }
        Ok(())
    }

    pub fn pricing(&self) -> Option<Pricing> {
        Some(Pricing {
            input_per_million: self.price_in?,
            output_per_million: self.price_out?,
        })
    }
}

/// First line an adapter emits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: String,
    pub name: String,
    pub kind: AdapterKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRequest {
    pub id: VacancyId,
    pub title: String,
    pub desc: String,
}

impl From<&VacancyRecord> for ExtractionRequest {
    fn from(r: &VacancyRecord) -> Self {
        Self {
            id: r.id.clone(),
            title: r.title.clone(),
            desc: r.desc.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResponse {
    pub id: VacancyId,
    #[serde(default)]
    pub skills: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_sec: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_out: Option<u64>,
    /// Set by adapters that failed this request but stay alive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retryable: Option<bool>,
}

impl ExtractionResponse {
    pub fn with_skills(id: VacancyId, skills: Vec<String>) -> Self {
        Self {
            id,
            skills,
            raw_output: None,
            latency_sec: None,
            tokens_in: None,
            tokens_out: None,
            error: None,
            retryable: None,
        }
    }

    /// Skills the harness scores. A `raw_output` string, when present, is
    /// parsed here rather than trusting the adapter's own split.
    pub fn predicted_skills(&self) -> Vec<String> {
        match &self.raw_output {
            Some(raw) => parse_skill_list(raw),
            None => Dedupe::CaseFold.apply(self.skills.iter().map(String::as_str)),
        }
    }
}

/// Splits a semicolon-separated LLM answer into distinct skills.
///
/// Items are trimmed and lose trailing periods; empty items are dropped;
/// repeats (case-insensitive) keep their first spelling. The result is a
/// fixed point: re-joining with `"; "` and parsing again yields it back.
pub fn parse_skill_list(raw: &str) -> Vec<String> {
    Dedupe::CaseFold.apply(
        raw.split(';')
            .map(|item| item.trim_end_matches(|c: char| c == '.' || c.is_whitespace())),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt template lacks the {PROMPT_PLACEHOLDER} placeholder")]
    MissingPlaceholder,
}

/// Substitutes the vacancy description, verbatim, for the placeholder.
pub fn prompt_render(template: &str, record: &VacancyRecord) -> Result<String, PromptError> {
    if !template.contains(PROMPT_PLACEHOLDER) {
        return Err(PromptError::MissingPlaceholder);
    }
    Ok(template.replace(PROMPT_PLACEHOLDER, &record.desc))
}

/// Harness-side accounting for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub vacancy_id: VacancyId,
    /// Measured by the harness around the call.
    pub wall_latency_sec: f64,
    /// As reported by the adapter, kept apart from the wall-clock figure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapter_latency_sec: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_out: Option<u64>,
    pub cost_usd: f64,
    /// False when prices or token counts were missing; `cost_usd` is 0 then.
    pub cost_available: bool,
}

impl UsageRecord {
    pub fn account(
        vacancy_id: VacancyId,
        wall_latency_sec: f64,
        response: &ExtractionResponse,
        pricing: Option<Pricing>,
    ) -> Self {
        let (cost_usd, cost_available) = match (pricing, response.tokens_in, response.tokens_out) {
            (Some(p), Some(tin), Some(tout)) => (p.cost(tin, tout), true),
            _ => (0.0, false),
        };
        Self {
            vacancy_id,
            wall_latency_sec: wall_latency_sec.max(0.0),
            adapter_latency_sec: response.latency_sec,
            tokens_in: response.tokens_in,
            tokens_out: response.tokens_out,
            cost_usd,
            cost_available,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub total_usd: f64,
    pub records: usize,
    /// Records whose cost could not be computed.
    pub records_unpriced: usize,
}

impl CostSummary {
    /// True when every record carried token counts and prices.
    pub fn complete(&self) -> bool {
        self.records_unpriced == 0
    }
}

pub fn compute_cost(usage: &[UsageRecord]) -> CostSummary {
    CostSummary {
        total_usd: usage.iter().map(|u| u.cost_usd).sum(),
        records: usage.len(),
        records_unpriced: usage.iter().filter(|u| !u.cost_available).count(),
    }
}

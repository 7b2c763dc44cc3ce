//! Run configuration: a TOML or JSON file, overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use skillbench_core::{
    AccuracyMode, AdapterManifest, Aggregation, MatcherMode, ScoringConfig, Threshold,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn default_embedder() -> String {
    "mock".into()
}
fn default_embedder_name() -> String {
    "bge-m3".into()
}
fn default_embedder_version() -> String {
    "1".into()
}
fn default_parallelism() -> usize {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("skillbench-out")
}
fn default_embed_timeout() -> f64 {
    120.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub adapters: Vec<AdapterManifest>,
    /// `"mock"` or the base URL of an embedding server.
    #[serde(default = "default_embedder")]
    pub embedder: String,
    /// Identity recorded in cache keys for a server embedder.
    #[serde(default = "default_embedder_name")]
    pub embedder_name: String,
    #[serde(default = "default_embedder_version")]
    pub embedder_version: String,
    #[serde(default = "default_embed_timeout")]
    pub embed_timeout_sec: f64,
    #[serde(default)]
    pub threshold: Threshold,
    #[serde(default)]
    pub matcher: MatcherMode,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub accuracy_mode: AccuracyMode,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Embeddings and extraction responses; `None` disables both caches.
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Parses by extension: `.json` as JSON, anything else as TOML.
pub fn load_file<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |message: String| ConfigError::Parse {
        path: path.to_path_buf(),
        message,
    };
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
    }
}

impl RunConfig {
    /// Loads a config file; a relative `dataset` path is taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = load_file(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(d) = &cfg.dataset {
            if d.is_relative() {
                cfg.dataset = Some(base.join(d));
            }
        }
        Ok(cfg)
    }

    pub fn scoring(&self) -> ScoringConfig {
        ScoringConfig {
            threshold: self.threshold,
            matcher: self.matcher,
            aggregation: self.aggregation,
            accuracy_mode: self.accuracy_mode,
            seed: self.seed,
            ..ScoringConfig::default()
        }
    }

    /// Checks what evaluation needs beyond what deserialization enforces.
    pub fn validate_for_evaluate(&self) -> Result<(), ConfigError> {
        if self.dataset.is_none() {
            return Err(ConfigError::Invalid("no dataset given".into()));
        }
        if self.adapters.is_empty() {
            return Err(ConfigError::Invalid(
                "at least one adapter is required".into(),
            ));
        }
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid(
                "parallelism must be at least 1".into(),
            ));
        }
        let mut names = std::collections::BTreeSet::new();
        for a in &self.adapters {
            a.validate()
                .map_err(|e| ConfigError::Invalid(format!("adapter {}: {e}", a.name)))?;
            if !names.insert(a.name.as_str()) {
                return Err(ConfigError::Invalid(format!(
                    "adapter name {} used twice",
                    a.name
                )));
            }
        }
        Ok(())
    }
}

/// Parses a serde-named enum value (`"greedy"`, `"recall-compat"`, ...).
pub fn parse_named<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

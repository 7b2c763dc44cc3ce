//! End-to-end commands shared by the CLI and the integration tests.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use log::{info, warn};
use skillbench_core::{
    compute_cost, dataset_stats, gold_skills, score_corpus, span_consistency_report,
    AdapterManifest, BenchmarkResult, ConfigFingerprint, CorpusScore, Embedder, MetricsRow,
    MockEmbedder, ScoringConfig, ScoringItem, Strictness, UsageRecord, VacancyRecord,
};

use crate::adapter::{run_adapter, RecordOutcome};
use crate::cache::{CachedEmbedder, EmbeddingCache};
use crate::config::RunConfig;
use crate::dataset::{load_dataset, load_predictions, write_predictions, Dataset, PredictionLine};
use crate::http_embed::HttpEmbedder;
use crate::output::{now_rfc3339, write_reports, DatasetInfo, RunManifest};
use crate::store::{file_safe, ExtractionStore, StoredExtraction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

/// Outcome of a command. `code` is the process exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandReport {
    pub code: i32,
    pub messages: Vec<String>,
}

impl CommandReport {
    fn fatal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_FATAL,
            messages: vec![message.into()],
        }
    }
}

/// Strict schema validation plus span/text consistency warnings.
pub fn cmd_validate(dataset: &Path) -> CommandReport {
    let d = match load_dataset(dataset, Strictness::Strict) {
        Ok(d) => d,
        Err(e) => return CommandReport::fatal(format!("error: {e}")),
    };
    let mut messages: Vec<String> = d
        .records
        .iter()
        .flat_map(span_consistency_report)
        .map(|m| format!("warning: {m}"))
        .collect();
    let stats = dataset_stats(&d.records);
    messages.push(format!(
        "ok: {} records, {} spans, {:.2} distinct skills per record, {} warning(s)",
        stats.records,
        stats.spans,
        stats.mean_skills_per_record,
        messages.len()
    ));
    CommandReport {
        code: EXIT_OK,
        messages,
    }
}

pub type BoxedEmbedder = CachedEmbedder<Box<dyn Embedder>>;

/// Builds the configured provider, wrapped in the persistent cache when a
/// cache directory is set.
pub fn build_embedder(cfg: &RunConfig) -> anyhow::Result<BoxedEmbedder> {
    let inner: Box<dyn Embedder> = if cfg.embedder == "mock" {
        Box::new(MockEmbedder::new())
    } else if cfg.embedder.starts_with("http://") || cfg.embedder.starts_with("https://") {
        Box::new(HttpEmbedder::connect(
            &cfg.embedder,
            &cfg.embedder_name,
            &cfg.embedder_version,
            Duration::from_secs_f64(cfg.embed_timeout_sec),
        )?)
    } else {
        anyhow::bail!(
            "embedder must be \"mock\" or an http(s) URL, got {:?}",
            cfg.embedder
        );
    };
    let cache = match &cfg.cache {
        Some(dir) => Some(Arc::new(EmbeddingCache::open(dir.join("embeddings"))?)),
        None => None,
    };
    Ok(CachedEmbedder::new(inner, cache))
}

/// Scores one model's predictions. Records absent from `predictions` are
/// not scored.
pub fn score_records<E: Embedder + ?Sized>(
    records: &[VacancyRecord],
    predictions: &HashMap<String, Vec<String>>,
    provider: &E,
    cfg: &ScoringConfig,
) -> anyhow::Result<CorpusScore> {
    let items: Vec<ScoringItem> = records
        .iter()
        .filter_map(|r| {
            predictions.get(&r.id.key()).map(|p| ScoringItem {
                gold: gold_skills(r, cfg.dedupe),
                predicted: p.clone(),
            })
        })
        .collect();
    Ok(score_corpus(&items, provider, cfg)?)
}

fn metrics_row(name: &str, s: &CorpusScore, cfg: &ScoringConfig) -> MetricsRow {
    MetricsRow::new(name, s.scores, s.auc, cfg.aggregation, cfg.accuracy_mode)
}

fn write_details(path: &Path, score: &CorpusScore) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for v in &score.per_vacancy {
        serde_json::to_writer(&mut f, v)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOptions {
    pub model: String,
    /// Write the report set here when set.
    pub out: Option<PathBuf>,
    /// Also write per-vacancy match details.
    pub details: bool,
}

#[derive(Debug, Clone)]
pub struct ScoreRun {
    pub report: CommandReport,
    pub score: Option<CorpusScore>,
    pub result: Option<BenchmarkResult>,
}

/// Offline scoring of a predictions JSONL file against the dataset.
pub fn cmd_score(cfg: &RunConfig, predictions_path: &Path, opts: &ScoreOptions) -> ScoreRun {
    let fail = |m: String| ScoreRun {
        report: CommandReport::fatal(m),
        score: None,
        result: None,
    };
    let started = now_rfc3339();
    let Some(dataset_path) = &cfg.dataset else {
        return fail("error: no dataset given".into());
    };
    let dataset = match load_dataset(dataset_path, Strictness::Lenient) {
        Ok(d) => d,
        Err(e) => return fail(format!("error: {e}")),
    };
    let lines = match load_predictions(predictions_path) {
        Ok(l) => l,
        Err(e) => return fail(format!("error: {e}")),
    };
    let index = dataset.index();
    let unknown: Vec<String> = lines
        .iter()
        .map(|l| l.id.key())
        .filter(|k| !index.contains_key(k))
        .collect();
    if !unknown.is_empty() {
        return fail(format!(
            "error: {}: ids not in the dataset: {}",
            predictions_path.display(),
            unknown.join(", ")
        ));
    }
    let mut predictions: HashMap<String, Vec<String>> =
        lines.into_iter().map(|l| (l.id.key(), l.skills)).collect();
    let mut messages = Vec::new();
    for r in &dataset.records {
        predictions.entry(r.id.key()).or_insert_with(|| {
            messages.push(format!(
                "warning: no prediction for vacancy {}, scored as empty",
                r.id
            ));
            Vec::new()
        });
    }
    for m in &messages {
        warn!("{m}");
    }

    let scoring = cfg.scoring();
    let embedder = match build_embedder(cfg) {
        Ok(e) => e,
        Err(e) => return fail(format!("error: embedder: {e:#}")),
    };
    let score = match score_records(&dataset.records, &predictions, &embedder, &scoring) {
        Ok(s) => s,
        Err(e) => return fail(format!("error: scoring: {e:#}")),
    };
    let fp = scoring.fingerprint(embedder.descriptor().namespace());
    let result = BenchmarkResult {
        metrics: metrics_row(&opts.model, &score, &scoring),
        kind: None,
        model_size_params: None,
        mean_latency_sec: None,
        cost: None,
        evaluated: score.per_vacancy.len(),
        failed: 0,
    };
    messages.push(summary_line(&result));
    if let Some(out) = &opts.out {
        let manifest = run_manifest(&dataset, fp, started, vec![result.clone()], Vec::new());
        match write_reports(out, &manifest) {
            Ok(ws) => messages.extend(ws.into_iter().map(|w| format!("warning: {w}"))),
            Err(e) => return fail(format!("error: {e}")),
        }
        if opts.details {
            let p = out.join(format!("details_{}.jsonl", file_safe(&opts.model)));
            if let Err(e) = write_details(&p, &score) {
                return fail(format!("error: {}: {e}", p.display()));
            }
        }
    }
    ScoreRun {
        report: CommandReport {
            code: EXIT_OK,
            messages,
        },
        score: Some(score),
        result: Some(result),
    }
}

pub fn summary_line(r: &BenchmarkResult) -> String {
    let m = &r.metrics;
    format!(
        "{}: accuracy={} f1={} precision={} recall={} auc={} evaluated={} failed={}",
        m.model,
        m.accuracy,
        m.f1,
        m.precision,
        m.recall,
        m.auc.map_or_else(|| "n/a".to_string(), |a| a.to_string()),
        r.evaluated,
        r.failed
    )
}

fn run_manifest(
    dataset: &Dataset,
    fingerprint: ConfigFingerprint,
    started_at: String,
    results: Vec<BenchmarkResult>,
    adapter_errors: Vec<(String, String)>,
) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        fingerprint,
        dataset: DatasetInfo {
            path: dataset.path.clone(),
            sha256: dataset.sha256.clone(),
            records: dataset.records.len(),
        },
        started_at,
        finished_at: now_rfc3339(),
        results,
        adapter_errors,
    }
}

/// What one adapter produced, after merging stored and fresh responses.
#[derive(Debug, Clone)]
pub struct AdapterEvaluation {
    pub manifest: AdapterManifest,
    /// Successful extractions in dataset order.
    pub extractions: Vec<StoredExtraction>,
    /// Failed vacancies and why.
    pub failures: Vec<(String, String)>,
    pub reused: usize,
}

fn extract_all(
    manifest: &AdapterManifest,
    dataset: &Dataset,
    cfg: &RunConfig,
) -> anyhow::Result<AdapterEvaluation> {
    let mut store = match &cfg.cache {
        Some(dir) => Some(ExtractionStore::open(ExtractionStore::path_for(
            dir,
            &manifest.name,
            &dataset.sha256,
        ))?),
        None => None,
    };
    let mut done: BTreeMap<usize, StoredExtraction> = BTreeMap::new();
    let mut todo = Vec::new();
    let mut todo_pos = Vec::new();
    for (i, r) in dataset.records.iter().enumerate() {
        match store.as_ref().and_then(|s| s.get(&r.id.key())) {
            Some(e) => {
                done.insert(i, e.clone());
            }
            None => {
                todo.push(r.clone());
                todo_pos.push(i);
            }
        }
    }
    let reused = done.len();
    if reused > 0 {
        info!(
            "adapter {}: reusing {reused} stored response(s)",
            manifest.name
        );
    }
    let mut failures = Vec::new();
    if !todo.is_empty() {
        let run = run_adapter(manifest, &todo, cfg.parallelism)?;
        for (pos, outcome) in todo_pos.into_iter().zip(run.outcomes) {
            match outcome {
                RecordOutcome::Done {
                    response, usage, ..
                } => {
                    let entry = StoredExtraction { response, usage };
                    if let Some(s) = store.as_mut() {
                        if let Err(e) = s.append(entry.clone()) {
                            warn!("{}: {e}", s.path().display());
                        }
                    }
                    done.insert(pos, entry);
                }
                RecordOutcome::Failed { id, error, .. } => failures.push((id.key(), error)),
            }
        }
    }
    Ok(AdapterEvaluation {
        manifest: manifest.clone(),
        extractions: done.into_values().collect(),
        failures,
        reused,
    })
}

fn benchmark_result(
    ev: &AdapterEvaluation,
    score: &CorpusScore,
    scoring: &ScoringConfig,
) -> BenchmarkResult {
    let usage: Vec<UsageRecord> = ev.extractions.iter().map(|e| e.usage.clone()).collect();
    let mean_latency_sec = (!usage.is_empty())
        .then(|| usage.iter().map(|u| u.wall_latency_sec).sum::<f64>() / usage.len() as f64);
    BenchmarkResult {
        metrics: metrics_row(&ev.manifest.name, score, scoring),
        kind: Some(ev.manifest.kind),
        model_size_params: ev.manifest.model_size_params,
        mean_latency_sec,
        cost: ev.manifest.pricing().map(|_| compute_cost(&usage)),
        evaluated: score.per_vacancy.len(),
        failed: ev.failures.len(),
    }
}

#[derive(Debug, Clone)]
pub struct EvaluateRun {
    pub report: CommandReport,
    pub results: Vec<BenchmarkResult>,
    pub scores: Vec<(String, CorpusScore)>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvaluateOptions {
    pub details: bool,
}

/// Extract with every adapter, score, and write the report set to `cfg.out`.
pub fn cmd_evaluate(cfg: &RunConfig, opts: EvaluateOptions) -> EvaluateRun {
    let fail = |m: String| EvaluateRun {
        report: CommandReport::fatal(m),
        results: Vec::new(),
        scores: Vec::new(),
    };
    let started = now_rfc3339();
    if let Err(e) = cfg.validate_for_evaluate() {
        return fail(format!("error: {e}"));
    }
    let dataset = match load_dataset(
        cfg.dataset.as_ref().expect("validated"),
        Strictness::Lenient,
    ) {
        Ok(d) => d,
        Err(e) => return fail(format!("error: {e}")),
    };
    let scoring = cfg.scoring();
    let embedder = match build_embedder(cfg) {
        Ok(e) => e,
        Err(e) => return fail(format!("error: embedder: {e:#}")),
    };
    if let Err(e) = fs::create_dir_all(&cfg.out) {
        return fail(format!("error: {}: {e}", cfg.out.display()));
    }

    let mut messages = Vec::new();
    let mut results = Vec::new();
    let mut scores = Vec::new();
    let mut adapter_errors = Vec::new();
    let mut partial = false;
    for manifest in &cfg.adapters {
        let ev = match extract_all(manifest, &dataset, cfg) {
            Ok(ev) => ev,
            Err(e) => {
                let m = format!("{e:#}");
                messages.push(format!("error: adapter {}: {m}", manifest.name));
                adapter_errors.push((manifest.name.clone(), m));
                partial = true;
                continue;
            }
        };
        for (id, err) in &ev.failures {
            messages.push(format!(
                "warning: adapter {}: vacancy {id} failed: {err}",
                manifest.name
            ));
        }
        partial |= !ev.failures.is_empty();

        let lines: Vec<PredictionLine> = ev
            .extractions
            .iter()
            .map(|e| PredictionLine {
                id: e.response.id.clone(),
                skills: e.response.predicted_skills(),
            })
            .collect();
        let pred_path = cfg
            .out
            .join(format!("predictions_{}.jsonl", file_safe(&manifest.name)));
        if let Err(e) = write_predictions(&pred_path, &lines) {
            return fail(format!("error: {}: {e}", pred_path.display()));
        }
        if lines.is_empty() {
            messages.push(format!(
                "error: adapter {}: no vacancy was extracted",
                manifest.name
            ));
            adapter_errors.push((manifest.name.clone(), "no vacancy was extracted".into()));
            continue;
        }
        let predictions: HashMap<String, Vec<String>> =
            lines.into_iter().map(|l| (l.id.key(), l.skills)).collect();
        let score = match score_records(&dataset.records, &predictions, &embedder, &scoring) {
            Ok(s) => s,
            Err(e) => return fail(format!("error: scoring {}: {e:#}", manifest.name)),
        };
        if opts.details {
            let p = cfg
                .out
                .join(format!("details_{}.jsonl", file_safe(&manifest.name)));
            if let Err(e) = write_details(&p, &score) {
                return fail(format!("error: {}: {e}", p.display()));
            }
        }
        let result = benchmark_result(&ev, &score, &scoring);
        messages.push(summary_line(&result));
        results.push(result);
        scores.push((manifest.name.clone(), score));
    }

    if results.is_empty() {
        messages.push("error: no adapter produced results".into());
        return EvaluateRun {
            report: CommandReport {
                code: EXIT_FATAL,
                messages,
            },
            results,
            scores,
        };
    }
    let fp = scoring.fingerprint(embedder.descriptor().namespace());
    let manifest = run_manifest(&dataset, fp, started, results.clone(), adapter_errors);
    match write_reports(&cfg.out, &manifest) {
        Ok(ws) => messages.extend(ws.into_iter().map(|w| format!("warning: {w}"))),
        Err(e) => return fail(format!("error: {e}")),
    }
    if let Some(c) = embedder.cache() {
        if let Err(e) = c.flush() {
            messages.push(format!("warning: {e}"));
        }
    }
    EvaluateRun {
        report: CommandReport {
            code: if partial { EXIT_PARTIAL } else { EXIT_OK },
            messages,
        },
        results,
        scores,
    }
}

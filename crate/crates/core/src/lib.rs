//! Scoring core for skill-extraction benchmarks.
//!
//! Everything in this crate is pure computation over in-memory data and only
//! needs an allocator: corpus validation, the deterministic trigram embedder,
//! cosine similarity, one-to-one threshold matching, the metric suite, the
//! adapter wire types and cost accounting. File formats, caches, processes and
//! the command line live in the `skillbench` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod corpus;
pub mod embedding;
pub mod extract;
pub mod matching;
pub mod metrics;
pub mod report;
pub mod score;

pub use corpus::{
    dataset_stats, gold_skills, span_consistency_report, validate_records, CorpusError,
    DatasetStats, Dedupe, GoldSkillSet, SkillSpan, SpanMismatch, SpanViolation, SpanWarning,
    Strictness, VacancyId, VacancyRecord, Validated,
};
pub use embedding::{
    cosine_similarity, embed_batch, mock_embed, EmbedError, Embedder, EmbedderDescriptor,
    EmbeddingVector, MockEmbedder, SimilarityError,
};
pub use extract::{
    compute_cost, parse_skill_list, prompt_render, AdapterKind, AdapterManifest, CostSummary,
    ExtractionRequest, ExtractionResponse, Handshake, ManifestError, Pricing, PromptError,
    Transport, UsageRecord, PROMPT_PLACEHOLDER, PROTOCOL_VERSION,
};
pub use matching::{
    match_exact, match_greedy, similarity_matrix, MatchOutcome, MatchPair, MatcherMode,
    MatrixError, SimilarityMatrix, Threshold, ThresholdError, DEFAULT_THRESHOLD,
};
pub use metrics::{
    accuracy, aggregate, detection_auc, precision_recall_f1, AccuracyMode, Aggregation,
    ConfusionCounts, MetricScores, MetricsError, MetricsRow, Prf,
};
pub use report::{
    format_latency, format_metric, format_size, format_usd, leaderboard_order, plottable,
    round_half_even, sort_results, BenchmarkResult, ConfigFingerprint, AUC_VARIANT,
};
pub use score::{
    score_corpus, score_vacancy, CorpusScore, ScoreError, ScoringConfig, ScoringItem, VacancyScore,
    VectorTable, EMBED_BATCH,
};

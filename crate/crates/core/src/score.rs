//! Scoring predicted skill lists against gold sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dedupe, GoldSkillSet, VacancyId};
use crate::embedding::{cosine_similarity, embed_batch, EmbedError, Embedder, EmbeddingVector};
use crate::matching::{MatchOutcome, MatcherMode, MatrixError, SimilarityMatrix, Threshold};
use crate::metrics::{
    aggregate, detection_auc, AccuracyMode, Aggregation, ConfusionCounts, MetricScores,
    MetricsError,
};
use crate::report::{ConfigFingerprint, AUC_VARIANT};

/// Texts per provider call when filling a [`VectorTable`].
pub const EMBED_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub threshold: Threshold,
    pub matcher: MatcherMode,
    pub aggregation: Aggregation,
    pub accuracy_mode: AccuracyMode,
    pub dedupe: Dedupe,
    /// Seed for AUC distractor sampling.
    pub seed: u64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            threshold: Threshold::default(),
            matcher: MatcherMode::Exact,
            aggregation: Aggregation::Macro,
            accuracy_mode: AccuracyMode::Jaccard,
            dedupe: Dedupe::CaseFold,
            seed: 0,
        }
    }
}

impl ScoringConfig {
    pub fn fingerprint(&self, embedder_namespace: impl Into<String>) -> ConfigFingerprint {
        ConfigFingerprint {
            threshold: self.threshold.value(),
            matcher: self.matcher,
            aggregation: self.aggregation,
            accuracy_mode: self.accuracy_mode,
            embedder: embedder_namespace.into(),
            seed: self.seed,
            auc_variant: AUC_VARIANT.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Distinct strings mapped to their vectors.
#[derive(Debug, Clone, Default)]
pub struct VectorTable {
    vectors: BTreeMap<String, EmbeddingVector>,
}

impl VectorTable {
    /// Embeds every distinct text, in sorted order, [`EMBED_BATCH`] at a time.
    pub fn build<'a, E, I>(provider: &E, texts: I) -> Result<Self, EmbedError>
    where
        E: Embedder + ?Sized,
        I: IntoIterator<Item = &'a str>,
    {
        let unique: BTreeSet<&str> = texts.into_iter().collect();
        let unique: Vec<&str> = unique.into_iter().collect();
        let mut vectors = BTreeMap::new();
        for chunk in unique.chunks(EMBED_BATCH) {
            for (text, v) in chunk.iter().zip(embed_batch(provider, chunk)?) {
                vectors.insert(String::from(*text), v);
            }
        }
        Ok(Self { vectors })
    }

    pub fn get(&self, text: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(text)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    fn lookup(&self, texts: &[String]) -> Vec<&EmbeddingVector> {
        texts.iter().map(|t| &self.vectors[t.as_str()]).collect()
    }

    pub fn matrix(
        &self,
        pred: &[String],
        gold: &[String],
    ) -> Result<SimilarityMatrix, MatrixError> {
        SimilarityMatrix::from_vectors(&self.lookup(pred), &self.lookup(gold))
    }

    /// Highest cosine between `text` and any of `others`; -1 when `others`
    /// is empty.
    fn best_similarity(&self, text: &str, others: &[&EmbeddingVector]) -> Result<f64, MatrixError> {
        let v = &self.vectors[text];
        let mut best = -1.0f64;
        for o in others {
            best = best.max(cosine_similarity(v, o)?);
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacancyScore {
    pub vacancy_id: VacancyId,
    pub gold: Vec<String>,
    pub predicted: Vec<String>,
    pub outcome: MatchOutcome,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScore {
    pub per_vacancy: Vec<VacancyScore>,
    pub scores: MetricScores,
    pub auc: Option<f64>,
    /// Positives and negatives that went into the AUC.
    pub auc_samples: (usize, usize),
}

/// One vacancy's gold set and the predictions for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringItem {
    pub gold: GoldSkillSet,
    pub predicted: Vec<String>,
}

/// Scores a single vacancy with its own embedding calls.
pub fn score_vacancy<E: Embedder + ?Sized>(
    gold: &GoldSkillSet,
    predicted: &[String],
    provider: &E,
    cfg: &ScoringConfig,
) -> Result<VacancyScore, ScoreError> {
    let predicted = cfg.dedupe.apply(predicted.iter().map(String::as_str));
    let m = crate::matching::similarity_matrix(&predicted, &gold.skills, provider)?;
    let outcome = cfg.matcher.run(&m, cfg.threshold);
    Ok(VacancyScore {
        vacancy_id: gold.vacancy_id.clone(),
        gold: gold.skills.clone(),
        predicted,
        counts: outcome.confusion_counts(),
        outcome,
    })
}

/// Scores every item, aggregates per `cfg`, and computes the detection AUC.
pub fn score_corpus<E: Embedder + ?Sized>(
    items: &[ScoringItem],
    provider: &E,
    cfg: &ScoringConfig,
) -> Result<CorpusScore, ScoreError> {
    let predicted: Vec<Vec<String>> = items
        .iter()
        .map(|it| cfg.dedupe.apply(it.predicted.iter().map(String::as_str)))
        .collect();
    let table = VectorTable::build(
        provider,
        items
            .iter()
            .flat_map(|it| it.gold.skills.iter())
            .chain(predicted.iter().flatten())
            .map(String::as_str),
    )?;

    let mut per_vacancy = Vec::with_capacity(items.len());
    for (it, pred) in items.iter().zip(predicted) {
        let m = table.matrix(&pred, &it.gold.skills)?;
        let outcome = cfg.matcher.run(&m, cfg.threshold);
        per_vacancy.push(VacancyScore {
            vacancy_id: it.gold.vacancy_id.clone(),
            gold: it.gold.skills.clone(),
            predicted: pred,
            counts: outcome.confusion_counts(),
            outcome,
        });
    }

    let counts: Vec<ConfusionCounts> = per_vacancy.iter().map(|v| v.counts).collect();
    let scores = aggregate(&counts, cfg.aggregation, cfg.accuracy_mode)?;
    let samples = auc_samples(&per_vacancy, &table, cfg)?;
    let positives = samples.iter().filter(|s| s.1).count();
    let auc = detection_auc(&samples).ok();
    Ok(CorpusScore {
        auc_samples: (positives, samples.len() - positives),
        per_vacancy,
        scores,
        auc,
    })
}

/// Positives: each gold skill scored by its best similarity to the
/// vacancy's predictions. Negatives: as many gold skills drawn from other
/// vacancies (skipping strings equal to one of this vacancy's gold skills),
/// scored the same way.
fn auc_samples(
    scored: &[VacancyScore],
    table: &VectorTable,
    cfg: &ScoringConfig,
) -> Result<Vec<(f64, bool)>, MatrixError> {
    let pool: Vec<(usize, &str)> = scored
        .iter()
        .enumerate()
        .flat_map(|(v, s)| s.gold.iter().map(move |g| (v, g.as_str())))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for (v, s) in scored.iter().enumerate() {
        let preds = table.lookup(&s.predicted);
        for g in &s.gold {
            out.push((table.best_similarity(g, &preds)?, true));
        }
        let own: BTreeSet<String> = s.gold.iter().map(|g| cfg.dedupe.key(g)).collect();
        let mut drawn = 0;
        let mut attempts = 0;
        while drawn < s.gold.len() && attempts < 32 * s.gold.len() && !pool.is_empty() {
            attempts += 1;
            let (owner, text) = pool[rng.random_range(0..pool.len())];
            if owner == v || own.contains(&cfg.dedupe.key(text)) {
                continue;
            }
            out.push((table.best_similarity(text, &preds)?, false));
            drawn += 1;
        }
    }
    Ok(out)
}

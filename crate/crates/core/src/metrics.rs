//! Precision / recall / F1, accuracy variants, micro and macro aggregation,
//! and the rank-statistic detection AUC.
//!
//! Every ratio with a zero denominator is defined as 0.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub const fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

#[inline]
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn precision_recall_f1(c: ConfusionCounts) -> Prf {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccuracyMode {
    /// tp / (tp + fp + fn)
    #[default]
    Jaccard,
    /// Same value as recall.
    RecallCompat,
}

impl AccuracyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AccuracyMode::Jaccard => "jaccard",
            AccuracyMode::RecallCompat => "recall-compat",
        }
    }
}

pub fn accuracy(c: ConfusionCounts, mode: AccuracyMode) -> f64 {
    match mode {
        AccuracyMode::Jaccard => ratio(c.tp, c.tp + c.fp + c.fn_),
        AccuracyMode::RecallCompat => precision_recall_f1(c).recall,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Sum counts over the corpus, compute once.
    Micro,
    /// Compute per vacancy, take the arithmetic mean.
    #[default]
    Macro,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Micro => "micro",
            Aggregation::Macro => "macro",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

impl MetricScores {
    fn of(c: ConfusionCounts, mode: AccuracyMode) -> Self {
        let prf = precision_recall_f1(c);
        Self {
            accuracy: accuracy(c, mode),
            f1: prf.f1,
            precision: prf.precision,
            recall: prf.recall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty list of vacancies")]
    Empty,
    #[error("AUC needs at least one positive and one negative ({positives} / {negatives})")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("AUC score #{0} is not finite")]
    NonFiniteScore(usize),
}

pub fn aggregate(
    per_vacancy: &[ConfusionCounts],
    aggregation: Aggregation,
    accuracy_mode: AccuracyMode,
) -> Result<MetricScores, MetricsError> {
    if per_vacancy.is_empty() {
        return Err(MetricsError::Empty);
    }
    match aggregation {
        Aggregation::Micro => {
            let total = per_vacancy
                .iter()
                .fold(ConfusionCounts::default(), |a, &b| a + b);
            Ok(MetricScores::of(total, accuracy_mode))
        }
        Aggregation::Macro => {
            let n = per_vacancy.len() as f64;
            let (mut a, mut f, mut p, mut r) = (0.0, 0.0, 0.0, 0.0);
            for &c in per_vacancy {
                let s = MetricScores::of(c, accuracy_mode);
                a += s.accuracy;
                f += s.f1;
                p += s.precision;
                r += s.recall;
            }
            Ok(MetricScores {
                accuracy: a / n,
                f1: f / n,
                precision: p / n,
                recall: r / n,
            })
        }
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counted half (Mann-Whitney U with mid-ranks).
pub fn detection_auc(scored: &[(f64, bool)]) -> Result<f64, MetricsError> {
    if let Some(i) = scored.iter().position(|(s, _)| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    let positives = scored.iter().filter(|(_, l)| *l).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::DegenerateLabels {
            positives,
            negatives,
        });
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));

    // Ranks are 1-based; a tie group spanning ranks lo..=hi gets (lo+hi)/2.
    // Doubling keeps everything integral.
    let mut pos_rank_sum_x2: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scored[order[end]].0 == scored[order[k]].0 {
            end += 1;
        }
        let mid_x2 = (k + 1 + end) as u128;
        let pos_in_group = order[k..end].iter().filter(|&&i| scored[i].1).count() as u128;
        pos_rank_sum_x2 += mid_x2 * pos_in_group;
        k = end;
    }
    let np = positives as u128;
    let u_x2 = pos_rank_sum_x2 - np * (np + 1);
    Ok(u_x2 as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// One leaderboard row with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// `None` when the pooled AUC set had no positives or no negatives.
    pub auc: Option<f64>,
    pub aggregation: Aggregation,
    pub accuracy_mode: AccuracyMode,
}

impl MetricsRow {
    pub fn new(
        model: impl Into<String>,
        scores: MetricScores,
        auc: Option<f64>,
        aggregation: Aggregation,
        accuracy_mode: AccuracyMode,
    ) -> Self {
        Self {
            model: model.into(),
            accuracy: scores.accuracy,
            f1: scores.f1,
            precision: scores.precision,
            recall: scores.recall,
            auc,
            aggregation,
            accuracy_mode,
        }
    }
}

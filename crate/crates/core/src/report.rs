//! Per-model benchmark results and the number formatting used by every
//! emitted table.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::extract::{AdapterKind, CostSummary};
use crate::matching::MatcherMode;
use crate::metrics::{AccuracyMode, Aggregation, MetricsRow};

/// Label attached to every AUC figure: it is this harness's rank-statistic
/// construction, not a canonical ROC AUC.
pub const AUC_VARIANT: &str =
    "detection-auc (max-similarity vs cross-vacancy distractors; non-canonical)";

/// Settings that determine every number in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFingerprint {
    pub threshold: f64,
    pub matcher: MatcherMode,
    pub aggregation: Aggregation,
    pub accuracy_mode: AccuracyMode,
    /// Embedder namespace, e.g. `mock-trigram@1/d256`.
    pub embedder: String,
    pub seed: u64,
    pub auc_variant: String,
}

impl ConfigFingerprint {
    /// Single-line `key=value` rendering embedded in every output file.
    pub fn line(&self) -> String {
        format!(
            "threshold={} matcher={} aggregation={} accuracy={} embedder={} seed={} auc={}",
            self.threshold,
            self.matcher.as_str(),
            self.aggregation.as_str(),
            self.accuracy_mode.as_str(),
            self.embedder,
            self.seed,
            self.auc_variant
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub metrics: MetricsRow,
    pub kind: Option<AdapterKind>,
    pub model_size_params: Option<u64>,
    /// Mean harness-side wall latency per successfully extracted vacancy.
    pub mean_latency_sec: Option<f64>,
    pub cost: Option<CostSummary>,
    /// Vacancies scored.
    pub evaluated: usize,
    /// Vacancies whose extraction failed past the retry budget.
    pub failed: usize,
}

impl BenchmarkResult {
    pub fn name(&self) -> &str {
        &self.metrics.model
    }
}

/// F1 descending, then model name ascending.
pub fn leaderboard_order(a: &BenchmarkResult, b: &BenchmarkResult) -> Ordering {
    b.metrics
        .f1
        .total_cmp(&a.metrics.f1)
        .then_with(|| a.metrics.model.cmp(&b.metrics.model))
}

pub fn sort_results(results: &mut [BenchmarkResult]) {
    results.sort_by(leaderboard_order);
}

/// Rounds to `digits` decimals, sending decimal halves to the even
/// neighbour. A value within 1e-9 (in units of the last kept digit) of a
/// half counts as a half, so `0.125` and `0.815` both count as
/// ties even though the latter is not exactly representable.
pub fn round_half_even(x: f64, digits: u32) -> f64 {
    let scale = libm::pow(10.0, digits as f64);
    let y = x * scale;
    let floor = libm::floor(y);
    let frac = y - floor;
    let r = if (frac - 0.5).abs() <= 1e-9 {
        if libm::fmod(floor, 2.0) == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        libm::round(y)
    };
    r / scale
}

/// Two-decimal metric cell.
pub fn format_metric(x: f64) -> String {
    format!("{:.2}", round_half_even(x, 2))
}

/// Parameter count with a K/M/B suffix: `180M`, `8B`, `1.5B`.
pub fn format_size(params: u64) -> String {
    let (div, suffix) = match params {
        p if p >= 1_000_000_000 => (1e9, "B"),
        p if p >= 1_000_000 => (1e6, "M"),
        p if p >= 1_000 => (1e3, "K"),
        _ => return format!("{params}"),
    };
    let mut digits = format!("{:.2}", params as f64 / div);
    while digits.ends_with('0') {
        digits.pop();
    }
    if digits.ends_with('.') {
        digits.pop();
    }
    format!("{digits}{suffix}")
}

/// Seconds with three decimals and a dot separator.
pub fn format_latency(sec: f64) -> String {
    format!("{sec:.3}")
}

pub fn format_usd(usd: f64) -> String {
    format!("{usd:.4}")
}

/// Results that carry a value for the requested axis, plus the names of
/// those that do not.
pub fn plottable<F>(
    results: &[BenchmarkResult],
    axis: F,
) -> (Vec<(&BenchmarkResult, f64)>, Vec<&str>)
where
    F: Fn(&BenchmarkResult) -> Option<f64>,
{
    let mut points = Vec::new();
    let mut omitted = Vec::new();
    for r in results {
        match axis(r) {
            Some(x) if x.is_finite() && x > 0.0 => points.push((r, x)),
            _ => omitted.push(r.name()),
        }
    }
    (points, omitted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricScores;

    pub(crate) fn result(name: &str, f1: f64) -> BenchmarkResult {
        let s = MetricScores {
            accuracy: f1,
            f1,
            precision: f1,
            recall: f1,
        };
        BenchmarkResult {
            metrics: MetricsRow::new(name, s, None, Aggregation::Macro, AccuracyMode::Jaccard),
            kind: None,
            model_size_params: None,
            mean_latency_sec: None,
            cost: None,
            evaluated: 1,
            failed: 0,
        }
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(format_metric(1.0), "1.00");
        assert_eq!(format_metric(0.125), "0.12");
        assert_eq!(format_metric(0.135), "0.14");
        assert_eq!(format_metric(0.815), "0.82");
        assert_eq!(format_metric(0.825), "0.82");
        assert_eq!(format_metric(0.8149), "0.81");
        assert_eq!(format_metric(2.0 / 3.0), "0.67");
        assert_eq!(format_metric(0.0), "0.00");
    }

    #[test]
    fn size_suffixes() {
        assert_eq!(format_size(180_000_000), "180M");
        assert_eq!(format_size(8_000_000_000), "8B");
        assert_eq!(format_size(110_000_000), "110M");
        assert_eq!(format_size(1_500_000_000), "1.5B");
        assert_eq!(format_size(175_000_000_000), "175B");
        assert_eq!(format_size(950), "950");
    }

    #[test]
    fn latency_cell() {
        assert_eq!(format_latency(0.0251234), "0.025");
        assert_eq!(format_latency(1.835), "1.835");
        assert_eq!(format_latency(10.116), "10.116");
    }

    #[test]
    fn ordering() {
        let mut rs = [
            result("gpt-4o", 0.59),
            result("DeepPavlov RuBert NER tuned", 0.81),
        ];
        sort_results(&mut rs);
        assert_eq!(rs[0].name(), "DeepPavlov RuBert NER tuned");
        let mut tied = [result("c", 0.5), result("a", 0.5), result("b", 0.5)];
        sort_results(&mut tied);
        let names: Vec<&str> = tied.iter().map(|r| r.name()).collect();
        assert_eq!(names, ["a", "b", "c"]);
    }

    #[test]
    fn plottable_omits_missing() {
        let mut a = result("a", 0.5);
        a.model_size_params = Some(10);
        let b = result("b", 0.4);
        let rs = [a, b];
        let (pts, omitted) = plottable(&rs, |r| r.model_size_params.map(|p| p as f64));
        assert_eq!(pts.len(), 1);
        assert_eq!(omitted, ["b"]);
    }
}

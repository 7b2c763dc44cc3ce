//! Threshold equivalence and one-to-one matching of predicted to gold skills.
//!
//! [`match_exact`] returns a maximum-cardinality matching over cells with
//! similarity ≥ θ and, among those, one of maximum total similarity. Ties
//! are broken lexicographically: walking predictions in index order, each
//! takes the smallest gold index that still admits an optimal matching, and
//! "unmatched" ranks after every gold index.
//!
//! Internally the problem is an assignment problem with integer weights
//! `BIG + round(sim · 2³²)` on eligible cells and `0` elsewhere, solved by
//! the Hungarian method. Every optimal assignment is a perfect matching of
//! the tight subgraph of the final dual potentials, so the lexicographic
//! walk only needs alternating-path searches on that subgraph.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embedding::{
    cosine_similarity, embed_batch, EmbedError, Embedder, EmbeddingVector, SimilarityError,
};
use crate::metrics::ConfusionCounts;

pub const DEFAULT_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("threshold {0} outside (0, 1]")]
pub struct ThresholdError(pub f64);

/// Equivalence threshold θ ∈ (0, 1]; comparison is inclusive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self, ThresholdError> {
        if value.is_finite() && value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(ThresholdError(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn admits(self, similarity: f64) -> bool {
        similarity >= self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self(DEFAULT_THRESHOLD)
    }
}

impl TryFrom<f64> for Threshold {
    type Error = ThresholdError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("{rows}x{cols} matrix needs {expected} cells, got {found}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: usize,
        found: usize,
    },
    #[error("cell ({row}, {col}) = {value} is not a cosine in [-1, 1]")]
    BadCell { row: usize, col: usize, value: f64 },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

/// Row-major P×G matrix of cosines, predictions on rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, cells: Vec<f64>) -> Result<Self, MatrixError> {
        if cells.len() != rows * cols {
            return Err(MatrixError::Shape {
                rows,
                cols,
                expected: rows * cols,
                found: cells.len(),
            });
        }
        for (k, &value) in cells.iter().enumerate() {
            if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
                return Err(MatrixError::BadCell {
                    row: k / cols.max(1),
                    col: k % cols.max(1),
                    value,
                });
            }
        }
        Ok(Self { rows, cols, cells })
    }

    /// Builds from nested rows; `cols` is taken from the first row (0 if none).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let cols = rows.first().map_or(0, Vec::len);
        let cells: Vec<f64> = rows.iter().flatten().copied().collect();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(MatrixError::Shape {
                rows: rows.len(),
                cols,
                expected: rows.len() * cols,
                found: cells.len(),
            });
        }
        Self::new(rows.len(), cols, cells)
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![0.0; rows * cols],
        }
    }

    /// Cosine of every (pred, gold) vector pair.
    pub fn from_vectors(
        pred: &[&EmbeddingVector],
        gold: &[&EmbeddingVector],
    ) -> Result<Self, MatrixError> {
        let mut cells = Vec::with_capacity(pred.len() * gold.len());
        for p in pred {
            for g in gold {
                cells.push(cosine_similarity(p, g)?);
            }
        }
        Ok(Self {
            rows: pred.len(),
            cols: gold.len(),
            cells,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.cells[row * self.cols..(row + 1) * self.cols]
    }

    /// Matrix with rows and columns reordered: `out[i][j] = self[rp[i]][cp[j]]`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len());
        for &r in row_perm {
            for &c in col_perm {
                cells.push(self.get(r, c));
            }
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            cells,
        }
    }
}

/// Embeds both skill lists with `provider` (each distinct string once) and
/// returns their cosine matrix.
pub fn similarity_matrix<E: Embedder + ?Sized>(
    pred: &[String],
    gold: &[String],
    provider: &E,
) -> Result<SimilarityMatrix, MatrixError> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut unique: Vec<&str> = Vec::new();
    for s in pred.iter().chain(gold) {
        index.entry(s.as_str()).or_insert_with(|| {
            unique.push(s.as_str());
            unique.len() - 1
        });
    }
    let vectors = embed_batch(provider, &unique)?;
    let lookup = |s: &String| &vectors[index[s.as_str()]];
    let p: Vec<&EmbeddingVector> = pred.iter().map(lookup).collect();
    let g: Vec<&EmbeddingVector> = gold.iter().map(lookup).collect();
    SimilarityMatrix::from_vectors(&p, &g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub pred: usize,
    pub gold: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    /// Sorted by prediction index.
    pub pairs: Vec<MatchPair>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gold: Vec<usize>,
    pub threshold: f64,
}

impl MatchOutcome {
    fn from_pairs(
        mut pairs: Vec<MatchPair>,
        rows: usize,
        cols: usize,
        threshold: Threshold,
    ) -> Self {
        pairs.sort_by_key(|p| (p.pred, p.gold));
        let mut pred_used = vec![false; rows];
        let mut gold_used = vec![false; cols];
        for p in &pairs {
            pred_used[p.pred] = true;
            gold_used[p.gold] = true;
        }
        Self {
            pairs,
            unmatched_pred: (0..rows).filter(|&i| !pred_used[i]).collect(),
            unmatched_gold: (0..cols).filter(|&j| !gold_used[j]).collect(),
            threshold: threshold.value(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.pairs.len()
    }

    pub fn total_similarity(&self) -> f64 {
        self.pairs.iter().map(|p| p.similarity).sum()
    }

    pub fn confusion_counts(&self) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.pairs.len() as u64,
            fp: self.unmatched_pred.len() as u64,
            fn_: self.unmatched_gold.len() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatcherMode {
    #[default]
    Exact,
    Greedy,
}

impl MatcherMode {
    pub fn run(self, m: &SimilarityMatrix, threshold: Threshold) -> MatchOutcome {
        match self {
            MatcherMode::Exact => match_exact(m, threshold),
            MatcherMode::Greedy => match_greedy(m, threshold),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatcherMode::Exact => "exact",
            MatcherMode::Greedy => "greedy",
        }
    }
}

/// Highest similarity first, ties by (pred, gold); a cell is taken when
/// both its row and column are still free.
pub fn match_greedy(m: &SimilarityMatrix, threshold: Threshold) -> MatchOutcome {
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..m.rows {
        for j in 0..m.cols {
            let s = m.get(i, j);
            if threshold.admits(s) {
                cells.push((i, j, s));
            }
        }
    }
    cells.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut row_free = vec![true; m.rows];
    let mut col_free = vec![true; m.cols];
    let mut pairs = Vec::new();
    for (i, j, s) in cells {
        if row_free[i] && col_free[j] {
            row_free[i] = false;
            col_free[j] = false;
            pairs.push(MatchPair {
                pred: i,
                gold: j,
                similarity: s,
            });
        }
    }
    MatchOutcome::from_pairs(pairs, m.rows, m.cols, threshold)
}

const SCALE: f64 = 4_294_967_296.0; // 2^32

pub fn match_exact(m: &SimilarityMatrix, threshold: Threshold) -> MatchOutcome {
    let (rows, cols) = (m.rows, m.cols);
    let n = rows.max(cols);
    let any_eligible = (0..rows).any(|i| m.row(i).iter().any(|&s| threshold.admits(s)));
    if !any_eligible {
        return MatchOutcome::from_pairs(Vec::new(), rows, cols, threshold);
    }

    // Cardinality dominates: one extra pair outweighs any similarity gain.
    let big = (n as i64 + 1) * SCALE as i64;
    let mut weight = vec![0i64; n * n];
    for i in 0..rows {
        for j in 0..cols {
            let s = m.get(i, j);
            if threshold.admits(s) {
                weight[i * n + j] = big + libm::round(s * SCALE) as i64;
            }
        }
    }

    let solved = hungarian_max(n, &weight);
    let tight = |i: usize, j: usize| solved.reduced_cost(&weight, i, j) == 0;

    // allowed[i][j]: edges row i may use; starts as the tight subgraph.
    let mut allowed: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| tight(i, j)).collect())
        .collect();
    let mut row_of = vec![usize::MAX; n];
    let mut col_of = solved.assignment.clone();
    for (i, &j) in col_of.iter().enumerate() {
        row_of[j] = i;
    }
    debug_assert!((0..n).all(|i| allowed[i][col_of[i]]));

    for i in 0..rows {
        let mut placed = false;
        for j in 0..cols {
            if weight[i * n + j] == 0 || !allowed[i][j] {
                continue;
            }
            if col_of[i] == j || reroute(i, j, &allowed, &mut col_of, &mut row_of) {
                allowed[i] = (0..n).map(|c| c == j).collect();
                placed = true;
                break;
            }
        }
        if !placed {
            // Row i stays unmatched: only zero-weight tight cells remain.
            for c in 0..n {
                if weight[i * n + c] != 0 {
                    allowed[i][c] = false;
                }
            }
            debug_assert!(allowed[i][col_of[i]]);
        }
    }

    let pairs = (0..rows)
        .filter_map(|i| {
            let j = col_of[i];
            (j < cols && weight[i * n + j] != 0).then(|| MatchPair {
                pred: i,
                gold: j,
                similarity: m.get(i, j),
            })
        })
        .collect();
    MatchOutcome::from_pairs(pairs, rows, cols, threshold)
}

/// Tries to give column `target` to row `row` while keeping a perfect
/// matching within `allowed`. On success the matching is updated.
fn reroute(
    row: usize,
    target: usize,
    allowed: &[Vec<bool>],
    col_of: &mut [usize],
    row_of: &mut [usize],
) -> bool {
    let n = col_of.len();
    let freed = col_of[row];
    let displaced = row_of[target];
    // Column `target` is now owned by `row`; `displaced` must reach `freed`
    // along an alternating path that avoids `row` and `target`.
    let mut seen = vec![false; n];
    seen[target] = true;
    let mut new_col_of = col_of.to_vec();
    let mut new_row_of = row_of.to_vec();
    new_col_of[row] = target;
    new_row_of[target] = row;
    new_row_of[freed] = usize::MAX;
    if augment(
        displaced,
        allowed,
        &mut seen,
        &mut new_col_of,
        &mut new_row_of,
    ) {
        col_of.copy_from_slice(&new_col_of);
        row_of.copy_from_slice(&new_row_of);
        true
    } else {
        false
    }
}

fn augment(
    r: usize,
    allowed: &[Vec<bool>],
    seen: &mut [bool],
    col_of: &mut [usize],
    row_of: &mut [usize],
) -> bool {
    for c in 0..col_of.len() {
        if !allowed[r][c] || seen[c] {
            continue;
        }
        seen[c] = true;
        let owner = row_of[c];
        if owner == usize::MAX || augment(owner, allowed, seen, col_of, row_of) {
            col_of[r] = c;
            row_of[c] = r;
            return true;
        }
    }
    false
}

struct Assignment {
    /// Column assigned to each row (0-based).
    assignment: Vec<usize>,
    /// Row potentials u[1..=n] and column potentials v[1..=n] for the
    /// minimisation of `-weight`.
    u: Vec<i64>,
    v: Vec<i64>,
}

impl Assignment {
    fn reduced_cost(&self, weight: &[i64], i: usize, j: usize) -> i64 {
        let n = self.assignment.len();
        -weight[i * n + j] - self.u[i + 1] - self.v[j + 1]
    }
}

/// Maximum-weight perfect assignment on an n×n integer matrix (Hungarian
/// method with potentials, O(n³)). Ties pick the smallest column index.
fn hungarian_max(n: usize, weight: &[i64]) -> Assignment {
    const INF: i64 = i64::MAX / 4;
    let cost = |i: usize, j: usize| -weight[(i - 1) * n + (j - 1)];
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    Assignment { assignment, u, v }
}

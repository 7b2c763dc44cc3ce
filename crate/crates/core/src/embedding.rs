//! Embedding vectors, the provider contract and cosine similarity.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Tolerance on ‖v‖₂ for providers that declare normalized output.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Wraps `values`; rejects empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Identifies the semantics of a provider's vectors. `name` + `version`
/// must change whenever vectors for the same text could change; the cache
/// keys on them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbedderDescriptor {
    pub name: String,
    pub dim: usize,
    pub normalized: bool,
    pub version: String,
}

impl EmbedderDescriptor {
    /// Stable namespace string for cache keys and report fingerprints.
    pub fn namespace(&self) -> String {
        alloc::format!("{}@{}/d{}", self.name, self.version, self.dim)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding provider unavailable: {0}")]
    Unavailable(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("provider returned {found} vectors for {expected} texts")]
    CountMismatch { expected: usize, found: usize },
    #[error("text #{index} is empty")]
    EmptyText { index: usize },
    #[error("vector has non-finite entry at {index}")]
    NonFinite { index: usize },
    #[error("vector #{index} declared normalized but has norm {norm}")]
    NotNormalized { index: usize, norm: f64 },
}

/// Something that turns strings into vectors. Implementations must be
/// deterministic for a fixed descriptor.
pub trait Embedder: Send + Sync {
    fn descriptor(&self) -> &EmbedderDescriptor;

    /// Raw provider call. Callers should go through [`embed_batch`], which
    /// validates the result against the descriptor.
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn descriptor(&self) -> &EmbedderDescriptor {
        (**self).descriptor()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed(texts)
    }
}

impl<E: Embedder + ?Sized> Embedder for alloc::boxed::Box<E> {
    fn descriptor(&self) -> &EmbedderDescriptor {
        (**self).descriptor()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed(texts)
    }
}

/// Embeds `texts` in order and checks count, dimension and declared
/// normalization.
pub fn embed_batch<E: Embedder + ?Sized>(
    provider: &E,
    texts: &[&str],
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if let Some(index) = texts.iter().position(|t| t.is_empty()) {
        return Err(EmbedError::EmptyText { index });
    }
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let desc = provider.descriptor();
    let out = provider.embed(texts)?;
    if out.len() != texts.len() {
        return Err(EmbedError::CountMismatch {
            expected: texts.len(),
            found: out.len(),
        });
    }
    for (index, v) in out.iter().enumerate() {
        if v.dim() != desc.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: desc.dim,
                found: v.dim(),
            });
        }
        if desc.normalized {
            let norm = v.norm();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(EmbedError::NotNormalized { index, norm });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SimilarityError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine undefined for a zero vector")]
    ZeroVector,
}

/// `dot(a,b) / sqrt(|a|² |b|²)`, clamped to [-1, 1].
///
/// Taking one square root of the product keeps `cos(v, v)` at exactly 1.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, SimilarityError> {
    if a.dim() != b.dim() {
        return Err(SimilarityError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok((dot / libm::sqrt(na * nb)).clamp(-1.0, 1.0))
}

pub const MOCK_DIM: usize = 256;
const MOCK_SEED: u64 = 0x736b_696c_6c62_656e;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn bucket(gram: &str) -> usize {
    let mut h = FNV_OFFSET;
    for b in MOCK_SEED.to_le_bytes().iter().chain(gram.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    (h % MOCK_DIM as u64) as usize
}

/// Character trigrams of the lowercased text. Strings shorter than three
/// characters contribute themselves as a single gram.
pub fn trigrams(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }
    if chars.len() < 3 {
        return vec![chars.iter().collect()];
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

/// Deterministic test embedder: L2-normalized counts of hashed character
/// trigrams in 256 buckets (FNV-1a with a fixed seed prefix).
pub fn mock_embed(text: &str) -> EmbeddingVector {
    let mut values = vec![0.0f64; MOCK_DIM];
    for g in trigrams(text) {
        values[bucket(&g)] += 1.0;
    }
    let norm = libm::sqrt(values.iter().map(|v| v * v).sum());
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    EmbeddingVector { values }
}

#[derive(Debug, Clone)]
pub struct MockEmbedder {
    descriptor: EmbedderDescriptor,
}

impl MockEmbedder {
    pub fn new() -> Self {
        Self {
            descriptor: EmbedderDescriptor {
                name: "mock-trigram".into(),
                dim: MOCK_DIM,
                normalized: true,
                version: "1".into(),
            },
        }
    }
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self::new()
    }
}

impl Embedder for MockEmbedder {
    fn descriptor(&self) -> &EmbedderDescriptor {
        &self.descriptor
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| mock_embed(t)).collect())
    }
}

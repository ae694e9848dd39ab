//! Shared domain types and the similarity kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// Width used when nothing else pins the embedding dimension.
pub const DEFAULT_DIM: usize = 768;

/// A fixed-width, finite feature vector stored in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParams("embedding must have dim >= 1".into()));
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: 0, col });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }
}

impl AsRef<[f32]> for EmbeddingVector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// Dot product accumulated in double precision, left to right.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (&x, &y)| acc + f64::from(x) * f64::from(y))
}

#[inline]
pub fn l2_norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

/// Scale `v` to unit L2 norm.
pub fn normalize(v: &EmbeddingVector) -> Result<EmbeddingVector> {
    normalize_slice(v.as_slice()).map(EmbeddingVector)
}

pub(crate) fn normalize_slice(v: &[f32]) -> Result<Vec<f32>> {
    let norm = l2_norm(v);
    if norm < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|&x| (f64::from(x) / norm) as f32).collect())
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a.as_slice(), b.as_slice()) / (na * nb)).clamp(-1.0, 1.0))
}

/// One reference exemplar: the embedding is the search key, the
/// description is what gets retrieved.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeEntry {
    pub id: String,
    pub species: String,
    pub category: String,
    pub description: String,
    pub embedding: EmbeddingVector,
}

/// A ranked search result. `rank` starts at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub entry_id: String,
    pub similarity: f64,
    pub rank: usize,
}

/// Ground-truth or predicted label pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub category: String,
    pub species: String,
}

//! Popularity-embedding (PE) baseline.
//!
//! Candidates are ranked by the cosine similarity between their
//! tier-rendered metadata embedding and the centroid of the embeddings of
//! recently popular items. Ships a dependency-free feature-hashing mock
//! backend for offline runs and an HTTP backend for real embedding models.

mod mock;
mod pe;
mod remote;

pub use mock::MockEmbedding;
pub use pe::{pe_rank, select_history};
pub use remote::{CachedEmbeddingBackend, EmbedEndpointConfig, HttpEmbeddingBackend};

use std::fmt;

use thiserror::Error;

use crate::catalog::MovieId;

/// Which argument of a two-vector operation was at fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("empty vector list")]
    EmptyList,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{side} vector has zero norm")]
    ZeroNorm { side: Side },

    #[error("vector contains a non-finite component")]
    NonFinite,

    #[error("cannot embed empty text (it would hash to the zero vector)")]
    EmptyText,

    #[error("empty popularity history")]
    EmptyHistory,

    #[error("embedding failed for movie {movie_id}: {detail}")]
    Movie { movie_id: MovieId, detail: String },

    #[error("embedding endpoint error: {0}")]
    Endpoint(String),
}

/// A fixed-dimension real vector with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> Result<Self, EmbedError> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(EmbeddingVector(components))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Text-to-vector backend. Deterministic per (`backend_id`, input text),
/// with a fixed output dimension.
pub trait EmbeddingBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;
}

impl<B: EmbeddingBackend + ?Sized> EmbeddingBackend for &B {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        (**self).embed(text)
    }
}

impl<B: EmbeddingBackend + ?Sized> EmbeddingBackend for Box<B> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        (**self).embed(text)
    }
}

/// Componentwise arithmetic mean of same-dimension vectors.
pub fn centroid(vectors: &[EmbeddingVector]) -> Result<EmbeddingVector, EmbedError> {
    let first = vectors.first().ok_or(EmbedError::EmptyList)?;
    let dimension = first.dimension();
    let mut sums = vec![0.0; dimension];
    for vector in vectors {
        if vector.dimension() != dimension {
            return Err(EmbedError::DimensionMismatch {
                left: dimension,
                right: vector.dimension(),
            });
        }
        for (sum, component) in sums.iter_mut().zip(vector.components()) {
            *sum += component;
        }
    }
    let n = vectors.len() as f64;
    for sum in &mut sums {
        *sum /= n;
    }
    EmbeddingVector::new(sums)
}

/// Cosine similarity, clamped to [-1, 1] against rounding.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let norm_a = a.norm();
    let norm_b = b.norm();
    if norm_a == 0.0 {
        return Err(EmbedError::ZeroNorm { side: Side::Left });
    }
    if norm_b == 0.0 {
        return Err(EmbedError::ZeroNorm { side: Side::Right });
    }
    let dot: f64 = a
        .components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| x * y)
        .sum();
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

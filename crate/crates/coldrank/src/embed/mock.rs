//! Offline embedding backend: bag-of-tokens feature hashing.
//!
//! Lowercased alphanumeric tokens are hashed (FNV-1a) into 256 buckets with
//! +1 counts, then L2-normalized. Shared tokens induce positive cosine,
//! disjoint token sets stay near zero (up to hash collisions), and the whole
//! thing is deterministic with no model downloads.

use super::{EmbedError, EmbeddingBackend, EmbeddingVector};

const DIMENSION: usize = 256;

#[derive(Debug, Default)]
pub struct MockEmbedding;

impl MockEmbedding {
    pub fn new() -> Self {
        MockEmbedding
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl EmbeddingBackend for MockEmbedding {
    fn backend_id(&self) -> &str {
        "mock-hash-256"
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut counts = vec![0.0f64; DIMENSION];
        let mut any = false;
        let lowered = text.to_lowercase();
        for token in lowered.split(|c: char| !c.is_alphanumeric()) {
            if token.is_empty() {
                continue;
            }
            any = true;
            counts[(fnv1a(token.as_bytes()) % DIMENSION as u64) as usize] += 1.0;
        }
        if !any {
            return Err(EmbedError::EmptyText);
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        for count in &mut counts {
            *count /= norm;
        }
        EmbeddingVector::new(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::cosine_similarity;

    #[test]
    fn identical_texts_embed_identically() {
        let backend = MockEmbedding::new();
        let a = backend.embed("Genre: Drama, Crime").unwrap();
        let b = backend.embed("Genre: Drama, Crime").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_eq!(a.dimension(), 256);
    }

    #[test]
    fn disjoint_token_sets_have_near_zero_cosine() {
        let backend = MockEmbedding::new();
        let fixtures = [
            ("western frontier gunslinger saloon", "romance paris violin candlelight"),
            ("glacier expedition summit blizzard", "jazz trumpet nightclub swing"),
            ("heist vault getaway driver", "wizard prophecy dragon kingdom"),
        ];
        for (left_text, right_text) in fixtures {
            let left = backend.embed(left_text).unwrap();
            let right = backend.embed(right_text).unwrap();
            let cosine = cosine_similarity(&left, &right).unwrap();
            assert!(cosine < 0.1, "{left_text:?} vs {right_text:?}: {cosine}");
        }
    }

    #[test]
    fn partial_overlap_sits_strictly_between_zero_and_one() {
        let backend = MockEmbedding::new();
        let a = backend.embed("drama crime").unwrap();
        let b = backend.embed("drama western").unwrap();
        let cosine = cosine_similarity(&a, &b).unwrap();
        assert!(cosine > 0.0 && cosine < 1.0, "cosine {cosine}");
    }

    #[test]
    fn empty_text_is_an_error() {
        let backend = MockEmbedding::new();
        assert!(matches!(backend.embed("  --- "), Err(EmbedError::EmptyText)));
    }

    #[test]
    fn case_and_punctuation_do_not_matter() {
        let backend = MockEmbedding::new();
        let a = backend.embed("Drama, Crime!").unwrap();
        let b = backend.embed("drama crime").unwrap();
        assert_eq!(a, b);
    }
}

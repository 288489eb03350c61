//! Test oracles: backends that answer from held-out ground truth.
//!
//! [`OracleBackend`] emits the perfect ranking in valid schema, which
//! upper-bounds the pipeline (all metrics 1.0). [`NoisyOracleBackend`]
//! degrades that ranking with seeded adjacent transpositions, giving a
//! controlled quality dial for calibration tests.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{BackendError, ChatBackend, Completion};
use crate::catalog::{EvaluationCase, MovieId};
use crate::ranker::PromptSpec;

/// Serialize a ranking into the wire schema with scores spaced 100 down
/// to 10.
pub(crate) fn render_ranking(order: &[MovieId], reason: &str) -> String {
    let n = order.len();
    let items: Vec<serde_json::Value> = order
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let score = if n <= 1 {
                100.0
            } else {
                100.0 - 90.0 * i as f64 / (n - 1) as f64
            };
            json!({
                "id": id.as_str(),
                "score": score,
                "reason": reason,
                "prior_knowledge": false,
            })
        })
        .collect();
    serde_json::to_string(&json!({ "ranking": items })).expect("schema serializes")
}

/// Answers every prompt with the true popularity order.
///
/// Holds, per case, the ground-truth order extended by the unlabeled
/// candidates in id order. A prompt is matched to the first stored case
/// whose candidate set contains all of the prompt's expected ids, so both
/// whole-list and pairwise prompts get consistent answers.
pub struct OracleBackend {
    orders: Vec<(BTreeSet<MovieId>, Vec<MovieId>)>,
}

impl OracleBackend {
    pub fn new(cases: &[EvaluationCase]) -> Self {
        let orders = cases
            .iter()
            .map(|case| {
                let order = extended_truth_order(case);
                (case.candidates.iter().cloned().collect(), order)
            })
            .collect();
        OracleBackend { orders }
    }

    /// Project the stored total order onto the requested ids.
    fn order_for(&self, expected: &[MovieId]) -> Option<Vec<MovieId>> {
        let wanted: BTreeSet<&MovieId> = expected.iter().collect();
        for (candidates, order) in &self.orders {
            if wanted.iter().all(|id| candidates.contains(*id)) {
                return Some(
                    order
                        .iter()
                        .filter(|id| wanted.contains(id))
                        .cloned()
                        .collect(),
                );
            }
        }
        None
    }
}

/// Ground-truth ids in label order, then the remaining candidates by id.
pub(crate) fn extended_truth_order(case: &EvaluationCase) -> Vec<MovieId> {
    let labeled: BTreeSet<&MovieId> = case.ground_truth.iter().map(|l| &l.movie_id).collect();
    let mut order: Vec<MovieId> = case
        .ground_truth
        .iter()
        .map(|l| l.movie_id.clone())
        .collect();
    let mut rest: Vec<MovieId> = case
        .candidates
        .iter()
        .filter(|id| !labeled.contains(id))
        .cloned()
        .collect();
    rest.sort();
    order.extend(rest);
    order
}

impl ChatBackend for OracleBackend {
    fn backend_id(&self) -> &str {
        "oracle"
    }

    fn model_id(&self) -> &str {
        "oracle"
    }

    fn complete(&self, spec: &PromptSpec) -> Result<Completion, BackendError> {
        let order = self.order_for(&spec.expected_ids).ok_or_else(|| {
            BackendError::fatal("oracle has no ground truth covering the requested ids")
        })?;
        Ok(Completion::offline(render_ranking(&order, "held-out popularity order")))
    }
}

/// An oracle degraded by `floor(epsilon * n(n-1)/2)` random adjacent
/// transpositions, seeded from the prompt's decoding seed.
pub struct NoisyOracleBackend {
    oracle: OracleBackend,
    epsilon: f64,
}

impl NoisyOracleBackend {
    /// `epsilon` in [0, 1]: 0 is the exact oracle, 1 applies as many
    /// adjacent swaps as there are item pairs.
    pub fn new(cases: &[EvaluationCase], epsilon: f64) -> Self {
        NoisyOracleBackend {
            oracle: OracleBackend::new(cases),
            epsilon: epsilon.clamp(0.0, 1.0),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl ChatBackend for NoisyOracleBackend {
    fn backend_id(&self) -> &str {
        "noisy-oracle"
    }

    fn model_id(&self) -> &str {
        "noisy-oracle"
    }

    fn complete(&self, spec: &PromptSpec) -> Result<Completion, BackendError> {
        let mut order = self.oracle.order_for(&spec.expected_ids).ok_or_else(|| {
            BackendError::fatal("oracle has no ground truth covering the requested ids")
        })?;

        let n = order.len();
        if n >= 2 {
            let pairs = n * (n - 1) / 2;
            let swaps = (self.epsilon * pairs as f64).floor() as usize;
            // Decorrelate cases within a trial by folding the ids into the seed.
            let ids_hash = fnv1a(
                spec.expected_ids
                    .iter()
                    .map(|id| id.as_str())
                    .collect::<Vec<_>>()
                    .join("\x1f")
                    .as_bytes(),
            );
            let seed = spec.decoding.seed.unwrap_or(0) ^ ids_hash;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..swaps {
                let at = rng.gen_range(0..n - 1);
                order.swap(at, at + 1);
            }
        }

        Ok(Completion::offline(render_ranking(&order, "noisy oracle order")))
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

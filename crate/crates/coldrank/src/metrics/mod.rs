//! Ranking-quality metrics, multi-trial aggregation and the random baseline.
//!
//! Every metric reads only the predicted ordering and the ground truth, so
//! shuffling candidate *input* order can never change a score. ACC@1 and
//! reciprocal rank track the single most popular item; NDCG@k uses linear
//! gain `rel / log2(i + 1)` with relevance equal to the ground-truth
//! popularity score; Recall@k divides the top-k overlap by
//! `min(k, |truth|)` so short label lists can still reach 1.0.

mod improvement;

pub use improvement::{
    improvement_report, improvement_values, ImprovementMode, ImprovementReport, ImprovementValue,
    ImprovementValues,
};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{EvaluationCase, LabeledMovie, MovieId};
use crate::ranker::{Provenance, RankedPrediction, Strategy};

/// The four per-case metrics (or their means over cases/trials).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub acc_at_1: f64,
    pub rr: f64,
    pub ndcg_at_k: f64,
    pub recall_at_k: f64,
    pub k: usize,
}

/// Mean and sample standard deviation over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub mean: MetricVector,
    pub std: MetricVector,
    pub n_trials: usize,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty ground truth")]
    EmptyTruth,

    #[error("empty prediction")]
    EmptyPrediction,

    #[error("k must be at least 1")]
    InvalidK,

    #[error("top ground-truth item {0} is missing from the prediction")]
    MissingTopItem(MovieId),

    #[error("no trials to aggregate")]
    NoTrials,

    #[error("trials disagree on k: {0} vs {1}")]
    MixedK(usize, usize),

    #[error("metric means cover different case sets: {0}")]
    CaseSetMismatch(String),
}

/// 1 if the truly most popular item is ranked first, else 0.
pub fn acc_at_1(pred: &[MovieId], truth: &[LabeledMovie]) -> Result<f64, MetricsError> {
    if truth.is_empty() {
        return Err(MetricsError::EmptyTruth);
    }
    let first = pred.first().ok_or(MetricsError::EmptyPrediction)?;
    Ok(if *first == truth[0].movie_id { 1.0 } else { 0.0 })
}

/// Reciprocal of the 1-indexed position of the truly most popular item.
pub fn reciprocal_rank(pred: &[MovieId], truth: &[LabeledMovie]) -> Result<f64, MetricsError> {
    if truth.is_empty() {
        return Err(MetricsError::EmptyTruth);
    }
    let top = &truth[0].movie_id;
    match pred.iter().position(|id| id == top) {
        Some(index) => Ok(1.0 / (index + 1) as f64),
        None => Err(MetricsError::MissingTopItem(top.clone())),
    }
}

/// Normalized discounted cumulative gain over the top `k` predictions.
///
/// `relevance` holds the ground-truth ids' scores; every id absent from the
/// map counts as relevance 0.
pub fn ndcg_at_k(
    pred: &[MovieId],
    relevance: &BTreeMap<MovieId, f64>,
    k: usize,
) -> Result<f64, MetricsError> {
    if k < 1 {
        return Err(MetricsError::InvalidK);
    }
    if relevance.is_empty() {
        return Err(MetricsError::EmptyTruth);
    }

    let discount = |index: usize| ((index + 2) as f64).log2();

    let dcg: f64 = pred
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, id)| relevance.get(id).copied().unwrap_or(0.0) / discount(i))
        .sum();

    let mut ideal: Vec<f64> = relevance.values().copied().collect();
    ideal.sort_by(|a, b| b.partial_cmp(a).expect("finite relevance"));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, rel)| rel / discount(i))
        .sum();

    if idcg == 0.0 {
        // Unreachable for valid cases: the top ground-truth score is 1.0.
        return Ok(1.0);
    }
    Ok(dcg / idcg)
}

/// Overlap between predicted top-k and true top-k, over `min(k, |truth|)`.
pub fn recall_at_k(pred: &[MovieId], truth: &[LabeledMovie], k: usize) -> Result<f64, MetricsError> {
    if k < 1 {
        return Err(MetricsError::InvalidK);
    }
    if truth.is_empty() {
        return Err(MetricsError::EmptyTruth);
    }
    let predicted: BTreeSet<&MovieId> = pred.iter().take(k).collect();
    let hits = truth
        .iter()
        .take(k)
        .filter(|label| predicted.contains(&label.movie_id))
        .count();
    Ok(hits as f64 / k.min(truth.len()) as f64)
}

/// All four metrics for one predicted ordering against one case.
pub fn case_metrics(
    pred: &[MovieId],
    case: &EvaluationCase,
    k: usize,
) -> Result<MetricVector, MetricsError> {
    let truth = &case.ground_truth;
    Ok(MetricVector {
        acc_at_1: acc_at_1(pred, truth)?,
        rr: reciprocal_rank(pred, truth)?,
        ndcg_at_k: ndcg_at_k(pred, &case.relevance(), k)?,
        recall_at_k: recall_at_k(pred, truth, k)?,
        k,
    })
}

/// Arithmetic mean and sample standard deviation per metric.
pub fn aggregate_trials(trials: &[MetricVector]) -> Result<TrialStats, MetricsError> {
    let first = trials.first().ok_or(MetricsError::NoTrials)?;
    for trial in trials {
        if trial.k != first.k {
            return Err(MetricsError::MixedK(first.k, trial.k));
        }
    }
    let n = trials.len() as f64;
    let mean_of = |pick: fn(&MetricVector) -> f64| trials.iter().map(pick).sum::<f64>() / n;
    let std_of = |pick: fn(&MetricVector) -> f64, mean: f64| {
        if trials.len() < 2 {
            return 0.0;
        }
        let ss: f64 = trials.iter().map(|t| (pick(t) - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    };

    let mean = MetricVector {
        acc_at_1: mean_of(|t| t.acc_at_1),
        rr: mean_of(|t| t.rr),
        ndcg_at_k: mean_of(|t| t.ndcg_at_k),
        recall_at_k: mean_of(|t| t.recall_at_k),
        k: first.k,
    };
    let std = MetricVector {
        acc_at_1: std_of(|t| t.acc_at_1, mean.acc_at_1),
        rr: std_of(|t| t.rr, mean.rr),
        ndcg_at_k: std_of(|t| t.ndcg_at_k, mean.ndcg_at_k),
        recall_at_k: std_of(|t| t.recall_at_k, mean.recall_at_k),
        k: first.k,
    };
    Ok(TrialStats {
        mean,
        std,
        n_trials: trials.len(),
    })
}

/// Mean of per-case metric vectors (all must share `k`).
pub fn mean_metrics(cases: &[MetricVector]) -> Result<MetricVector, MetricsError> {
    Ok(aggregate_trials(cases)?.mean)
}

/// Seeded uniform random permutation of the case's candidates.
pub fn random_rank(case: &EvaluationCase, seed: u64) -> RankedPrediction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ordering = case.candidates.clone();
    ordering.shuffle(&mut rng);
    RankedPrediction {
        case_id: case.case_id.clone(),
        ordering,
        scores: BTreeMap::new(),
        reasoning: None,
        strategy: Strategy::Random,
        provenance: Provenance {
            backend_id: "random".into(),
            model_id: "random".into(),
            trial_seed: seed,
            retries_used: 0,
            template_version: None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::WindowConfig;
    use chrono::NaiveDate;

    fn id(s: &str) -> MovieId {
        MovieId::from(s)
    }

    fn ids(names: &[&str]) -> Vec<MovieId> {
        names.iter().map(|s| id(s)).collect()
    }

    fn truth(entries: &[(&str, f64)]) -> Vec<LabeledMovie> {
        entries
            .iter()
            .map(|(name, score)| LabeledMovie {
                movie_id: id(name),
                popularity_score: *score,
            })
            .collect()
    }

    fn case(candidates: &[&str], labels: &[(&str, f64)]) -> EvaluationCase {
        EvaluationCase::new(
            "t".into(),
            NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            ids(candidates),
            truth(labels),
            WindowConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn acc_at_1_checks_the_first_slot() {
        let t = truth(&[("a", 1.0)]);
        assert_eq!(acc_at_1(&ids(&["a", "b", "c"]), &t).unwrap(), 1.0);
        assert_eq!(acc_at_1(&ids(&["b", "a", "c"]), &t).unwrap(), 0.0);
        assert!(acc_at_1(&ids(&["a"]), &[]).is_err());
    }

    #[test]
    fn reciprocal_rank_is_one_over_position() {
        let t = truth(&[("a", 1.0)]);
        assert_eq!(reciprocal_rank(&ids(&["a", "b"]), &t).unwrap(), 1.0);
        assert_eq!(reciprocal_rank(&ids(&["b", "c", "d", "a"]), &t).unwrap(), 0.25);
        assert!(reciprocal_rank(&ids(&["b", "c"]), &t).is_err());
    }

    #[test]
    fn perfect_ordering_scores_ndcg_one() {
        let c = case(&["a", "b", "c"], &[("a", 1.0), ("b", 0.8), ("c", 0.6)]);
        let score = ndcg_at_k(&ids(&["a", "b", "c"]), &c.relevance(), 3).unwrap();
        assert!((score - 1.0).abs() < 1e-12);
    }

    /// Relevances (1.0, 0.8, 0.6) predicted at positions (2, 1, 3):
    /// DCG  = 0.8/log2(2) + 1.0/log2(3) + 0.6/log2(4)
    /// IDCG = 1.0/log2(2) + 0.8/log2(3) + 0.6/log2(4)
    /// The expected value is frozen from that direct evaluation.
    #[test]
    fn ndcg_matches_direct_formula_fixture() {
        let c = case(&["a", "b", "c"], &[("a", 1.0), ("b", 0.8), ("c", 0.6)]);
        let pred = ids(&["b", "a", "c"]);

        let dcg = 0.8 / 2.0_f64.log2() + 1.0 / 3.0_f64.log2() + 0.6 / 4.0_f64.log2();
        let idcg = 1.0 / 2.0_f64.log2() + 0.8 / 3.0_f64.log2() + 0.6 / 4.0_f64.log2();
        let expected = dcg / idcg;
        assert!((expected - 0.959_100_0).abs() < 1e-6, "oracle drifted: {expected}");

        let score = ndcg_at_k(&pred, &c.relevance(), 3).unwrap();
        assert!((score - expected).abs() < 1e-9);
    }

    #[test]
    fn ndcg_is_zero_when_truth_misses_top_k() {
        let c = case(
            &["a", "b", "c", "d", "e"],
            &[("a", 1.0), ("b", 0.5)],
        );
        let score = ndcg_at_k(&ids(&["c", "d", "e", "a", "b"]), &c.relevance(), 3).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn ndcg_rejects_k_zero() {
        let c = case(&["a", "b"], &[("a", 1.0)]);
        assert!(matches!(
            ndcg_at_k(&ids(&["a", "b"]), &c.relevance(), 0),
            Err(MetricsError::InvalidK)
        ));
    }

    #[test]
    fn recall_counts_topk_overlap() {
        let t = truth(&[("a", 1.0), ("b", 0.8), ("c", 0.6)]);
        let hit2 = recall_at_k(&ids(&["a", "x", "c", "b"]), &t, 3).unwrap();
        assert!((hit2 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(recall_at_k(&ids(&["c", "a", "b"]), &t, 3).unwrap(), 1.0);
    }

    #[test]
    fn recall_denominator_is_min_k_truth() {
        // |truth| = 1 < k: a single hit is full recall.
        let t = truth(&[("a", 1.0)]);
        assert_eq!(recall_at_k(&ids(&["x", "a", "y"]), &t, 3).unwrap(), 1.0);
    }

    #[test]
    fn recall_at_1_equals_acc_at_1_for_top_item() {
        let t = truth(&[("a", 1.0), ("b", 0.4)]);
        for pred in [ids(&["a", "b", "c"]), ids(&["c", "a", "b"])] {
            assert_eq!(
                recall_at_k(&pred, &t[..1], 1).unwrap(),
                acc_at_1(&pred, &t).unwrap()
            );
        }
    }

    #[test]
    fn aggregate_means_and_sample_std() {
        let m = |acc: f64| MetricVector {
            acc_at_1: acc,
            rr: acc,
            ndcg_at_k: acc,
            recall_at_k: acc,
            k: 3,
        };
        let same = aggregate_trials(&[m(0.4), m(0.4), m(0.4)]).unwrap();
        assert!(same.std.acc_at_1.abs() < 1e-12);

        let half = aggregate_trials(&[m(0.0), m(1.0)]).unwrap();
        assert!((half.mean.acc_at_1 - 0.5).abs() < 1e-12);
        assert!((half.std.acc_at_1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);

        assert!(matches!(aggregate_trials(&[]), Err(MetricsError::NoTrials)));
    }

    #[test]
    fn random_rank_is_seeded_and_uniform_at_first_position() {
        let c = case(
            &["a", "b", "c", "d", "e"],
            &[("a", 1.0), ("b", 0.5), ("c", 0.25)],
        );
        let p1 = random_rank(&c, 99);
        let p2 = random_rank(&c, 99);
        assert_eq!(p1.ordering, p2.ordering);
        assert_eq!(p1.strategy, Strategy::Random);

        let mut sorted = p1.ordering.clone();
        sorted.sort();
        assert_eq!(sorted, c.candidates);

        let mut firsts: BTreeMap<MovieId, u32> = BTreeMap::new();
        for seed in 0..20_000u64 {
            let p = random_rank(&c, seed);
            *firsts.entry(p.ordering[0].clone()).or_default() += 1;
        }
        for (_, count) in firsts {
            let freq = count as f64 / 20_000.0;
            assert!((freq - 0.2).abs() < 0.015, "first-slot frequency {freq}");
        }
    }

    #[test]
    fn metrics_ignore_candidate_input_order() {
        let labels = [("b", 1.0), ("d", 0.7), ("a", 0.4)];
        let forward = case(&["a", "b", "c", "d"], &labels);
        let mut shuffled = forward.clone();
        shuffled.candidates.reverse();

        let pred = ids(&["d", "b", "a", "c"]);
        let m1 = case_metrics(&pred, &forward, 3).unwrap();
        let m2 = case_metrics(&pred, &shuffled, 3).unwrap();
        assert_eq!(m1, m2);
    }
}

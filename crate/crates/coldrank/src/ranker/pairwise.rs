//! Pairwise ranking: every unordered candidate pair is compared in both
//! presentation orders (n(n-1) calls) and wins are aggregated into a total
//! order.
//!
//! A valid response credits the winner with 1 point (0.5 each on an
//! explicit score tie). A pair query that exhausts its retries scores
//! 0.5/0.5 and is logged; the case fails only when more than half of all
//! pair queries fail. The final order is win tally, then mean reported
//! score, then movie id.

use std::collections::BTreeMap;

use super::prompt::corrective_suffix;
use super::{
    build_pairwise_prompt, parse_response, AttemptFailure, CaseFailure, ParseOutcome, Provenance,
    RankConfig, RankError, RankedPrediction, Strategy,
};
use crate::backend::{BackendError, ChatBackend};
use crate::catalog::{Catalog, EvaluationCase, MovieId};
use crate::par;

/// Outcome of one directed pair query.
enum PairOutcome {
    /// (left tally delta, right tally delta, left score, right score)
    Scored(f64, f64, f64, f64),
    Failed(AttemptFailure),
}

/// Rank a case by exhaustive two-movie comparisons.
pub fn pairwise_rank(
    case: &EvaluationCase,
    movies: &Catalog,
    backend: &dyn ChatBackend,
    cfg: &RankConfig,
) -> Result<RankedPrediction, RankError> {
    let n = case.candidates.len();

    // Both presentation orders per unordered pair, in a fixed order.
    let mut queries: Vec<(MovieId, MovieId)> = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (case.candidates[i].clone(), case.candidates[j].clone());
            queries.push((a.clone(), b.clone()));
            queries.push((b, a));
        }
    }

    // Prompts are built up front so render errors abort before any call.
    let mut prompts = Vec::with_capacity(queries.len());
    for (left_id, right_id) in &queries {
        let left = movies.require(left_id)?;
        let right = movies.require(right_id)?;
        prompts.push((left_id.clone(), right_id.clone(), build_pairwise_prompt(left, right, movies, cfg)?));
    }

    let outcomes = par::map(&prompts, |(left_id, right_id, base)| {
        compare_once(left_id, right_id, base, backend, cfg)
    });

    let mut tally: BTreeMap<&MovieId, f64> =
        case.candidates.iter().map(|id| (id, 0.0)).collect();
    let mut score_sums: BTreeMap<&MovieId, (f64, u32)> = BTreeMap::new();
    let mut failed_queries = 0usize;
    let mut last_failure: Option<AttemptFailure> = None;

    for ((left_id, right_id, _), outcome) in prompts.iter().zip(outcomes) {
        match outcome? {
            PairOutcome::Scored(left_delta, right_delta, left_score, right_score) => {
                *tally.get_mut(left_id).expect("candidate") += left_delta;
                *tally.get_mut(right_id).expect("candidate") += right_delta;
                let entry = score_sums.entry(left_id).or_insert((0.0, 0));
                entry.0 += left_score;
                entry.1 += 1;
                let entry = score_sums.entry(right_id).or_insert((0.0, 0));
                entry.0 += right_score;
                entry.1 += 1;
            }
            PairOutcome::Failed(failure) => {
                log::warn!(
                    "case {}: pair ({left_id}, {right_id}) failed, splitting the point: {failure}",
                    case.case_id
                );
                *tally.get_mut(left_id).expect("candidate") += 0.5;
                *tally.get_mut(right_id).expect("candidate") += 0.5;
                failed_queries += 1;
                last_failure = Some(failure);
            }
        }
    }

    if failed_queries * 2 > queries.len() {
        return Err(RankError::CaseFailed(CaseFailure {
            case_id: case.case_id.clone(),
            strategy: Strategy::Pairwise,
            attempts: (cfg.retries + 1) * queries.len() as u32,
            last: last_failure.expect("failures were recorded"),
        }));
    }

    let mean_score = |id: &MovieId| -> f64 {
        match score_sums.get(id) {
            Some((sum, count)) if *count > 0 => sum / *count as f64,
            _ => 0.0,
        }
    };

    let mut ordering = case.candidates.clone();
    ordering.sort_by(|a, b| {
        tally[b]
            .partial_cmp(&tally[a])
            .expect("finite tally")
            .then_with(|| mean_score(b).partial_cmp(&mean_score(a)).expect("finite score"))
            .then_with(|| a.cmp(b))
    });

    let scores: BTreeMap<MovieId, f64> = ordering.iter().map(|id| (id.clone(), tally[id])).collect();

    Ok(RankedPrediction {
        case_id: case.case_id.clone(),
        ordering,
        scores,
        reasoning: None,
        strategy: Strategy::Pairwise,
        provenance: Provenance {
            backend_id: backend.backend_id().to_string(),
            model_id: backend.model_id().to_string(),
            trial_seed: cfg.trial_seed,
            retries_used: failed_queries as u32,
            template_version: Some(cfg.templates.version.clone()),
        },
    })
}

/// Run one directed pair query with the shared retry-with-feedback loop.
fn compare_once(
    left_id: &MovieId,
    right_id: &MovieId,
    base: &super::PromptSpec,
    backend: &dyn ChatBackend,
    cfg: &RankConfig,
) -> Result<PairOutcome, RankError> {
    let mut spec = base.clone();
    let mut last: Option<AttemptFailure> = None;

    for _ in 0..=cfg.retries {
        match backend.complete(&spec) {
            Err(e @ BackendError::Fatal { .. }) => {
                return Err(RankError::FatalBackend(e.to_string()));
            }
            Err(e) => {
                last = Some(AttemptFailure::Transport {
                    detail: e.to_string(),
                });
            }
            Ok(completion) => match parse_response(&completion.raw_text, &spec.expected_ids) {
                ParseOutcome::Success { response, .. } => {
                    let left_score = response.scores[left_id];
                    let right_score = response.scores[right_id];
                    let (left_delta, right_delta) = if left_score == right_score {
                        (0.5, 0.5)
                    } else if response.ranking[0] == *left_id {
                        (1.0, 0.0)
                    } else {
                        (0.0, 1.0)
                    };
                    return Ok(PairOutcome::Scored(
                        left_delta,
                        right_delta,
                        left_score,
                        right_score,
                    ));
                }
                ParseOutcome::Failure { code, detail } => {
                    spec = base.clone();
                    spec.user_text.push_str(&corrective_suffix(code, &detail, 2));
                    last = Some(AttemptFailure::Parse { code, detail });
                }
            },
        }
    }
    Ok(PairOutcome::Failed(last.expect("at least one attempt ran")))
}

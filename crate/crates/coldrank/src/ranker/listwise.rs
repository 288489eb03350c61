//! Listwise ranking: one structured call reorders the whole candidate list.
//!
//! Rejected responses are retried with the failure code appended to the
//! prompt as a corrective instruction, up to the configured retry budget.
//! Transport errors consume attempts from the same budget; fatal backend
//! errors abort immediately.

use super::prompt::corrective_suffix;
use super::{
    build_listwise_prompt, parse_response, AttemptFailure, CaseFailure, Provenance, RankConfig,
    RankError, RankedPrediction, RankerResponse, Strategy,
};
use crate::backend::{BackendError, ChatBackend};
use crate::catalog::{Catalog, EvaluationCase};

/// Rank a case's candidates with a single structured chat call.
pub fn listwise_rank(
    case: &EvaluationCase,
    movies: &Catalog,
    backend: &dyn ChatBackend,
    cfg: &RankConfig,
) -> Result<RankedPrediction, RankError> {
    let base = build_listwise_prompt(case, movies, cfg)?;
    let mut spec = base.clone();
    let mut last: Option<AttemptFailure> = None;

    for attempt in 0..=cfg.retries {
        match backend.complete(&spec) {
            Err(e @ BackendError::Fatal { .. }) => {
                return Err(RankError::FatalBackend(e.to_string()));
            }
            Err(e) => {
                last = Some(AttemptFailure::Transport {
                    detail: e.to_string(),
                });
                // Same prompt again; the transport problem was not ours.
            }
            Ok(completion) => match parse_response(&completion.raw_text, &spec.expected_ids) {
                super::ParseOutcome::Success { response, note } => {
                    if let Some(note) = note {
                        log::debug!("case {}: accepted with note: {note}", case.case_id);
                    }
                    return Ok(wrap(case, response, backend, cfg, attempt));
                }
                super::ParseOutcome::Failure { code, detail } => {
                    spec = base.clone();
                    spec.user_text
                        .push_str(&corrective_suffix(code, &detail, base.expected_ids.len()));
                    last = Some(AttemptFailure::Parse { code, detail });
                }
            },
        }
    }

    Err(RankError::CaseFailed(CaseFailure {
        case_id: case.case_id.clone(),
        strategy: Strategy::Listwise,
        attempts: cfg.retries + 1,
        last: last.expect("at least one attempt ran"),
    }))
}

fn wrap(
    case: &EvaluationCase,
    response: RankerResponse,
    backend: &dyn ChatBackend,
    cfg: &RankConfig,
    retries_used: u32,
) -> RankedPrediction {
    RankedPrediction {
        case_id: case.case_id.clone(),
        ordering: response.ranking,
        scores: response.scores,
        reasoning: Some(response.reasoning),
        strategy: Strategy::Listwise,
        provenance: Provenance {
            backend_id: backend.backend_id().to_string(),
            model_id: backend.model_id().to_string(),
            trial_seed: cfg.trial_seed,
            retries_used,
            template_version: Some(cfg.templates.version.clone()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::testing::ScriptedBackend;
    use crate::backend::OracleBackend;
    use crate::catalog::{GenConfig, Tier};
    use crate::ranker::FailureCode;

    fn fixture() -> (EvaluationCase, Catalog) {
        let (catalog, observations) =
            crate::catalog::synthesize_catalog(&GenConfig::default(), 3).unwrap();
        let out = crate::catalog::build_cases(
            &catalog,
            &observations,
            &crate::catalog::WindowConfig::default(),
        )
        .unwrap();
        (out.cases[0].clone(), catalog)
    }

    #[test]
    fn oracle_backend_reproduces_the_truth_order() {
        let (case, catalog) = fixture();
        let oracle = OracleBackend::new(std::slice::from_ref(&case));
        let cfg = RankConfig::new(Tier::V1);
        let prediction = listwise_rank(&case, &catalog, &oracle, &cfg).unwrap();

        assert!(prediction.is_permutation_of(&case));
        let truth_ids: Vec<_> = case.ground_truth.iter().map(|l| &l.movie_id).collect();
        assert_eq!(
            prediction.ordering[..truth_ids.len()],
            truth_ids.iter().map(|&id| id.clone()).collect::<Vec<_>>()[..]
        );
        assert_eq!(prediction.provenance.retries_used, 0);
        assert_eq!(prediction.strategy, Strategy::Listwise);
    }

    #[test]
    fn two_failures_then_success_uses_two_retries() {
        let (case, catalog) = fixture();
        let oracle = OracleBackend::new(std::slice::from_ref(&case));
        let cfg = RankConfig::new(Tier::V1);

        let good = {
            let spec = build_listwise_prompt(&case, &catalog, &cfg).unwrap();
            oracle.complete(&spec).unwrap().raw_text
        };
        let backend = ScriptedBackend::from_texts(&["garbage", "{\"ranking\":[]}", &good]);

        let mut cfg = cfg;
        cfg.retries = 3;
        let prediction = listwise_rank(&case, &catalog, &backend, &cfg).unwrap();
        assert_eq!(prediction.provenance.retries_used, 2);
    }

    #[test]
    fn persistent_hallucination_exhausts_into_case_failure() {
        let (case, catalog) = fixture();
        // Right length, but one id the prompt never offered.
        let items: Vec<String> = case
            .candidates
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let id = if i == 1 { "zz-invented" } else { id.as_str() };
                format!(r#"{{"id":"{id}","score":{}}}"#, 90 - i * 10)
            })
            .collect();
        let bogus = format!(r#"{{"ranking":[{}]}}"#, items.join(","));
        let backend = ScriptedBackend::from_texts(&[&bogus, &bogus, &bogus, &bogus]);
        let mut cfg = RankConfig::new(Tier::V1);
        cfg.retries = 3;

        match listwise_rank(&case, &catalog, &backend, &cfg) {
            Err(RankError::CaseFailed(failure)) => {
                assert_eq!(failure.attempts, 4);
                assert!(matches!(
                    failure.last,
                    AttemptFailure::Parse {
                        code: FailureCode::HallucinatedItem,
                        ..
                    }
                ));
            }
            other => panic!("expected case failure, got {other:?}"),
        }
    }

    #[test]
    fn transport_errors_consume_retry_attempts() {
        let (case, catalog) = fixture();
        let backend = ScriptedBackend::new(vec![
            Err(crate::backend::BackendError::transport("boom")),
            Err(crate::backend::BackendError::transport("boom")),
        ]);
        let mut cfg = RankConfig::new(Tier::V1);
        cfg.retries = 1;

        match listwise_rank(&case, &catalog, &backend, &cfg) {
            Err(RankError::CaseFailed(failure)) => {
                assert_eq!(failure.attempts, 2);
                assert!(matches!(failure.last, AttemptFailure::Transport { .. }));
            }
            other => panic!("expected case failure, got {other:?}"),
        }
    }

    #[test]
    fn retry_prompt_carries_the_failure_code() {
        let (case, catalog) = fixture();
        let cfg = RankConfig::new(Tier::V1);
        let base = build_listwise_prompt(&case, &catalog, &cfg).unwrap();
        let mut with_suffix = base.user_text.clone();
        with_suffix.push_str(&corrective_suffix(
            FailureCode::LengthMismatch,
            "expected 5 items, got 1",
            case.candidates.len(),
        ));
        assert!(with_suffix.contains("LENGTH_MISMATCH"));
        assert!(with_suffix.contains(&case.candidates.len().to_string()));
    }
}

//! The PE ranking itself: history selection, centroid, cosine ordering.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};

use super::{centroid, cosine_similarity, EmbedError, EmbeddingBackend, EmbeddingVector};
use crate::catalog::{
    render_metadata, Catalog, EvaluationCase, MovieId, MovieRecord, PopularityObservation, Tier,
    WindowConfig,
};
use crate::par;
use crate::ranker::{Provenance, RankedPrediction, Strategy};

/// The most popular movies over the `history_weeks` strictly before
/// `as_of`, most popular first, truncated to `centroid_top_n`.
///
/// Only interactions inside the lookback window count, so label data from
/// the case's own horizon can never leak into the centroid.
pub fn select_history(
    movies: &Catalog,
    observations: &[PopularityObservation],
    as_of: NaiveDate,
    cfg: &WindowConfig,
) -> Vec<MovieRecord> {
    let lookback_start = as_of - Days::new(7 * cfg.history_weeks as u64);
    let last_included = as_of - Days::new(1);

    let mut totals: BTreeMap<&MovieId, u64> = BTreeMap::new();
    for obs in observations {
        if obs.window_start <= last_included && obs.window_end >= lookback_start {
            *totals.entry(&obs.movie_id).or_default() += obs.interaction_count;
        }
    }

    let mut ranked: Vec<(&MovieId, u64)> = totals
        .into_iter()
        .filter(|(_, count)| *count > 0)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    ranked
        .into_iter()
        .take(cfg.centroid_top_n as usize)
        .filter_map(|(id, _)| movies.get(id).cloned())
        .collect()
}

/// Rank a case's candidates by cosine similarity to the centroid of the
/// history embeddings, ties broken by movie id.
///
/// History and candidates are embedded concurrently but reduced in a
/// canonical order, so the output never depends on scheduling and is
/// invariant under permutations of `history`.
pub fn pe_rank(
    case: &EvaluationCase,
    movies: &Catalog,
    history: &[MovieRecord],
    backend: &dyn EmbeddingBackend,
    tier: Tier,
) -> Result<RankedPrediction, EmbedError> {
    if history.is_empty() {
        return Err(EmbedError::EmptyHistory);
    }

    // Canonical order: movie id, regardless of caller ordering.
    let mut history_sorted: Vec<&MovieRecord> = history.iter().collect();
    history_sorted.sort_by(|a, b| a.movie_id.cmp(&b.movie_id));

    let history_vectors = embed_all(&history_sorted, backend, tier)?;
    let center = centroid(&history_vectors).map_err(|e| EmbedError::Endpoint(e.to_string()))?;

    let mut candidates: Vec<&MovieRecord> = Vec::with_capacity(case.candidates.len());
    for id in &case.candidates {
        candidates.push(movies.get(id).ok_or_else(|| EmbedError::Movie {
            movie_id: id.clone(),
            detail: "candidate not in catalog".into(),
        })?);
    }
    candidates.sort_by(|a, b| a.movie_id.cmp(&b.movie_id));

    let candidate_vectors = embed_all(&candidates, backend, tier)?;
    let mut scored: Vec<(MovieId, f64)> = Vec::with_capacity(candidates.len());
    for (movie, vector) in candidates.iter().zip(&candidate_vectors) {
        let cosine = cosine_similarity(vector, &center).map_err(|e| EmbedError::Movie {
            movie_id: movie.movie_id.clone(),
            detail: e.to_string(),
        })?;
        scored.push((movie.movie_id.clone(), cosine));
    }

    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite cosine")
            .then_with(|| a.0.cmp(&b.0))
    });

    Ok(RankedPrediction {
        case_id: case.case_id.clone(),
        ordering: scored.iter().map(|(id, _)| id.clone()).collect(),
        scores: scored.into_iter().collect(),
        reasoning: None,
        strategy: Strategy::Pe,
        provenance: Provenance {
            backend_id: backend.backend_id().to_string(),
            model_id: backend.backend_id().to_string(),
            trial_seed: 0,
            retries_used: 0,
            template_version: None,
        },
    })
}

/// Render and embed a batch, surfacing the failing movie's id.
fn embed_all(
    movies: &[&MovieRecord],
    backend: &dyn EmbeddingBackend,
    tier: Tier,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    par::map(movies, |movie| {
        let rendered = render_metadata(movie, tier).map_err(|e| EmbedError::Movie {
            movie_id: movie.movie_id.clone(),
            detail: e.to_string(),
        })?;
        backend.embed(&rendered).map_err(|e| EmbedError::Movie {
            movie_id: movie.movie_id.clone(),
            detail: e.to_string(),
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{test_movie, LabeledMovie};
    use crate::embed::MockEmbedding;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn case_over(ids: &[&str]) -> EvaluationCase {
        EvaluationCase::new(
            "c1".into(),
            date("2024-06-07"),
            ids.iter().map(|s| MovieId::from(*s)).collect(),
            vec![LabeledMovie {
                movie_id: MovieId::from(ids[0]),
                popularity_score: 1.0,
            }],
            WindowConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn identical_candidates_fall_back_to_id_order() {
        let ids = ["m3", "m1", "m2"];
        let catalog = Catalog::from_records(
            ids.iter().map(|id| test_movie(id, date("2024-06-07"))).collect(),
        )
        .unwrap();
        let history = vec![test_movie("h1", date("2024-05-01"))];
        let case = case_over(&ids);

        let prediction =
            pe_rank(&case, &catalog, &history, &MockEmbedding::new(), Tier::V1).unwrap();
        let order: Vec<&str> = prediction.ordering.iter().map(|id| id.as_str()).collect();
        assert_eq!(order, vec!["m1", "m2", "m3"]);
    }

    #[test]
    fn genre_match_with_history_ranks_first() {
        // History is all Drama; a Drama candidate should beat a Western.
        let mut drama = test_movie("m1", date("2024-06-07"));
        drama.genres = vec!["Drama".into()];
        let mut western = test_movie("m2", date("2024-06-07"));
        western.genres = vec!["Western".into()];
        let catalog = Catalog::from_records(vec![drama, western.clone()]).unwrap();

        let history: Vec<MovieRecord> = (0..5)
            .map(|i| {
                let mut h = test_movie(&format!("h{i}"), date("2024-05-01"));
                h.genres = vec!["Drama".into()];
                h
            })
            .collect();

        let case = case_over(&["m1", "m2"]);
        let backend = MockEmbedding::new();
        let prediction = pe_rank(&case, &catalog, &history, &backend, Tier::V1).unwrap();
        assert_eq!(prediction.ordering[0].as_str(), "m1");

        // Hand oracle: V1 text is exactly the genre line, so the m1 vector
        // equals the centroid and cosine must be 1.
        assert!((prediction.scores[&MovieId::from("m1")] - 1.0).abs() < 1e-12);
        assert!(prediction.scores[&MovieId::from("m2")] < 1.0);
    }

    #[test]
    fn history_permutations_do_not_change_the_output() {
        let ids = ["m1", "m2", "m3"];
        let mut records: Vec<MovieRecord> = Vec::new();
        for (i, id) in ids.iter().enumerate() {
            let mut m = test_movie(id, date("2024-06-07"));
            m.genres = vec![["Drama", "Comedy", "Thriller"][i].into()];
            records.push(m);
        }
        let catalog = Catalog::from_records(records).unwrap();

        let mut history: Vec<MovieRecord> = (0..6)
            .map(|i| {
                let mut h = test_movie(&format!("h{i}"), date("2024-05-01"));
                h.genres = vec![["Drama", "Comedy"][i % 2].into()];
                h.synopsis = format!("History movie number {i}.");
                h
            })
            .collect();

        let case = case_over(&ids);
        let backend = MockEmbedding::new();
        let forward = pe_rank(&case, &catalog, &history, &backend, Tier::V1).unwrap();
        history.reverse();
        let reversed = pe_rank(&case, &catalog, &history, &backend, Tier::V1).unwrap();
        assert_eq!(forward, reversed);
    }

    #[test]
    fn scores_are_non_increasing_down_the_ranking() {
        let (catalog, observations) =
            crate::catalog::synthesize_catalog(&crate::catalog::GenConfig::default(), 21).unwrap();
        let cfg = WindowConfig::default();
        let out = crate::catalog::build_cases(&catalog, &observations, &cfg).unwrap();
        let case = out
            .cases
            .iter()
            .find(|c| {
                !select_history(&catalog, &observations, c.as_of_date, &cfg).is_empty()
            })
            .expect("some case has history");

        let history = select_history(&catalog, &observations, case.as_of_date, &cfg);
        let prediction =
            pe_rank(case, &catalog, &history, &MockEmbedding::new(), Tier::V3).unwrap();
        assert!(prediction.is_permutation_of(case));
        for pair in prediction.ordering.windows(2) {
            assert!(prediction.scores[&pair[0]] >= prediction.scores[&pair[1]]);
        }
    }

    #[test]
    fn empty_history_is_an_error() {
        let catalog =
            Catalog::from_records(vec![test_movie("m1", date("2024-06-07")), test_movie("m2", date("2024-06-07"))])
                .unwrap();
        let case = case_over(&["m1", "m2"]);
        let err = pe_rank(&case, &catalog, &[], &MockEmbedding::new(), Tier::V1).unwrap_err();
        assert!(matches!(err, EmbedError::EmptyHistory));
    }

    #[test]
    fn history_selection_respects_the_lookback_and_cutoff() {
        let cfg = WindowConfig {
            history_weeks: 2,
            centroid_top_n: 2,
            ..WindowConfig::default()
        };
        let catalog = Catalog::from_records(vec![
            test_movie("old", date("2024-01-01")),
            test_movie("recent-big", date("2024-05-01")),
            test_movie("recent-small", date("2024-05-02")),
            test_movie("future", date("2024-06-10")),
        ])
        .unwrap();
        let as_of = date("2024-06-01");
        let obs = |id: &str, start: &str, end: &str, count: u64| PopularityObservation {
            movie_id: MovieId::from(id),
            window_start: date(start),
            window_end: date(end),
            interaction_count: count,
        };
        let observations = vec![
            // Far outside the 2-week lookback.
            obs("old", "2024-01-01", "2024-01-07", 500),
            obs("recent-big", "2024-05-20", "2024-05-26", 90),
            obs("recent-small", "2024-05-20", "2024-05-26", 30),
            // Starts exactly at as_of: must be excluded (strictly before).
            obs("future", "2024-06-01", "2024-06-07", 1000),
        ];

        let history = select_history(&catalog, &observations, as_of, &cfg);
        let ids: Vec<&str> = history.iter().map(|m| m.movie_id.as_str()).collect();
        assert_eq!(ids, vec!["recent-big", "recent-small"]);
    }
}

//! Case construction from release logs.
//!
//! Releases are grouped into fixed-width calendar cohorts counted from the
//! earliest release. Each cohort with at least two movies becomes one
//! [`EvaluationCase`]: the cohort's movies are the candidates and the movies
//! with the most interactions over the observe horizon become the ordered
//! ground truth, scores normalized by the cohort maximum.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{
    Catalog, CatalogError, EvaluationCase, LabeledMovie, MovieId, MovieRecord,
    PopularityObservation, WindowConfig,
};

/// One skipped cohort and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub cohort_id: String,
    pub reason: String,
}

/// Cases plus the skip log.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutput {
    pub cases: Vec<EvaluationCase>,
    pub skipped: Vec<SkipEntry>,
}

/// Group releases into cohorts and label each cohort by later popularity.
///
/// Insensitive to the input order of `observations`. Cohorts with fewer
/// than two candidates, or without a single positive interaction count,
/// are skipped and recorded.
pub fn build_cases(
    movies: &Catalog,
    observations: &[PopularityObservation],
    cfg: &WindowConfig,
) -> Result<BuildOutput, CatalogError> {
    cfg.validate()?;
    if movies.is_empty() {
        return Err(CatalogError::EmptyCatalog);
    }

    let by_movie = index_observations(observations)?;

    let earliest = movies
        .iter()
        .map(|m| m.release_date)
        .min()
        .expect("catalog is non-empty");

    let mut cohorts: BTreeMap<u64, Vec<&MovieRecord>> = BTreeMap::new();
    for movie in movies.iter() {
        let offset = (movie.release_date - earliest).num_days() as u64;
        cohorts
            .entry(offset / cfg.cohort_period_days as u64)
            .or_default()
            .push(movie);
    }

    let mut cases = Vec::new();
    let mut skipped = Vec::new();

    for (cohort_index, members) in cohorts {
        let cohort_id = format!("c{cohort_index:04}");
        if members.len() < 2 {
            skipped.push(SkipEntry {
                cohort_id,
                reason: format!("fewer than 2 candidates ({})", members.len()),
            });
            continue;
        }

        let mut scored: Vec<(MovieId, u64)> = Vec::with_capacity(members.len());
        for movie in &members {
            let horizon_end =
                movie.release_date + Days::new(cfg.observe_horizon_days as u64);
            let count = horizon_count(movie, horizon_end, &by_movie)?;
            scored.push((movie.movie_id.clone(), count));
        }

        // Candidates listed in id order; ranking strategies decide the rest.
        let mut candidates: Vec<MovieId> = scored.iter().map(|(id, _)| id.clone()).collect();
        candidates.sort();

        let max_count = scored.iter().map(|(_, c)| *c).max().unwrap_or(0);
        if max_count == 0 {
            skipped.push(SkipEntry {
                cohort_id,
                reason: "no positive interaction counts in horizon".into(),
            });
            continue;
        }

        scored.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let ground_truth: Vec<LabeledMovie> = scored
            .iter()
            .filter(|(_, count)| *count > 0)
            .take(cfg.label_list_size as usize)
            .map(|(id, count)| LabeledMovie {
                movie_id: id.clone(),
                popularity_score: *count as f64 / max_count as f64,
            })
            .collect();

        let as_of_date = earliest + Days::new(cohort_index * cfg.cohort_period_days as u64);
        cases.push(EvaluationCase::new(
            cohort_id,
            as_of_date,
            candidates,
            ground_truth,
            cfg.clone(),
        )?);
    }

    Ok(BuildOutput { cases, skipped })
}

/// Observations per movie, sorted by window, with window sanity checks.
fn index_observations(
    observations: &[PopularityObservation],
) -> Result<BTreeMap<&MovieId, Vec<&PopularityObservation>>, CatalogError> {
    let mut by_movie: BTreeMap<&MovieId, Vec<&PopularityObservation>> = BTreeMap::new();
    for obs in observations {
        if obs.window_start > obs.window_end {
            return Err(CatalogError::InvalidWindow {
                movie_id: obs.movie_id.clone(),
                window_start: obs.window_start,
                window_end: obs.window_end,
            });
        }
        by_movie.entry(&obs.movie_id).or_default().push(obs);
    }
    for list in by_movie.values_mut() {
        list.sort_by_key(|o| (o.window_start, o.window_end));
        for pair in list.windows(2) {
            if pair[0].window_start == pair[1].window_start
                && pair[0].window_end == pair[1].window_end
            {
                return Err(CatalogError::DuplicateObservation {
                    movie_id: pair[0].movie_id.clone(),
                    window_start: pair[0].window_start,
                    window_end: pair[0].window_end,
                });
            }
        }
    }
    Ok(by_movie)
}

/// Total interactions over `[release, horizon_end]`, requiring the movie's
/// observation windows to cover every day of that horizon.
fn horizon_count(
    movie: &MovieRecord,
    horizon_end: NaiveDate,
    by_movie: &BTreeMap<&MovieId, Vec<&PopularityObservation>>,
) -> Result<u64, CatalogError> {
    let missing = || CatalogError::MissingCoverage {
        movie_id: movie.movie_id.clone(),
        window_start: movie.release_date,
        window_end: horizon_end,
    };
    let windows = by_movie.get(&movie.movie_id).ok_or_else(missing)?;

    let mut covered_until: Option<NaiveDate> = None;
    let mut total = 0u64;
    for obs in windows {
        // Windows are sorted by start; extend coverage only while contiguous.
        let reaches = match covered_until {
            None => obs.window_start <= movie.release_date,
            Some(until) => obs.window_start <= until + Days::new(1),
        };
        if reaches {
            let candidate_end = obs.window_end.max(covered_until.unwrap_or(obs.window_end));
            covered_until = Some(candidate_end);
        }
        if obs.window_start <= horizon_end && obs.window_end >= movie.release_date {
            total += obs.interaction_count;
        }
    }
    match covered_until {
        Some(until) if until >= horizon_end => Ok(total),
        _ => Err(missing()),
    }
}

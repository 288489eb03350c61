//! Data model for movies, interactions and evaluation cases.
//!
//! A [`Catalog`] holds movie metadata; [`PopularityObservation`]s record how
//! often each movie was watched in a time window. [`build_cases`] groups new
//! releases into cohorts and labels each cohort with the movies that later
//! became popular. [`synthesize_catalog`] generates deterministic synthetic
//! data with popularity statistically tied to metadata, and
//! [`render_metadata`] turns a movie into prompt text at one of four
//! cumulative metadata tiers.

mod build;
mod render;
mod store;
mod synth;

pub use build::{build_cases, BuildOutput, SkipEntry};
pub use render::render_metadata;
pub use store::{
    load_cases, load_catalog, load_observations, save_cases, save_catalog, save_observations,
    save_skip_log,
};
pub use synth::{synthesize_catalog, GenConfig};

#[cfg(test)]
pub(crate) use synth::test_movie;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque unique movie identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MovieId(pub String);

impl MovieId {
    pub fn new(id: impl Into<String>) -> Self {
        MovieId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MovieId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MovieId {
    fn from(s: &str) -> Self {
        MovieId(s.to_string())
    }
}

impl From<String> for MovieId {
    fn from(s: String) -> Self {
        MovieId(s)
    }
}

/// Role of a person credit on a movie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CreditRole {
    Cast,
    Director,
    Writer,
    Other,
}

impl fmt::Display for CreditRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CreditRole::Cast => "cast",
            CreditRole::Director => "director",
            CreditRole::Writer => "writer",
            CreditRole::Other => "other",
        };
        f.write_str(s)
    }
}

/// One cast or crew credit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonCredit {
    pub name: String,
    pub role: CreditRole,
    /// Position in the billing order, 0 = top billed. Unique per role
    /// within one movie.
    pub billing_order: u32,
    pub award_count: u32,
}

/// A movie plus its tiered metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieRecord {
    pub movie_id: MovieId,
    pub title: String,
    pub release_date: NaiveDate,
    pub genres: Vec<String>,
    pub synopsis: String,
    pub content_rating: String,
    /// Decade-style label, e.g. "2020s".
    pub era: String,
    pub mood: Vec<String>,
    pub character_types: Vec<String>,
    pub cast: Vec<PersonCredit>,
    pub crew: Vec<PersonCredit>,
    pub awards: Vec<String>,
}

impl MovieRecord {
    /// Structural checks: billing order unique per role across cast + crew.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut seen = std::collections::BTreeSet::new();
        for credit in self.cast.iter().chain(&self.crew) {
            if !seen.insert((credit.role as u8, credit.billing_order)) {
                return Err(CatalogError::DuplicateBilling {
                    movie_id: self.movie_id.clone(),
                    role: credit.role,
                    billing_order: credit.billing_order,
                });
            }
        }
        Ok(())
    }
}

/// Interaction count for one movie over one time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityObservation {
    pub movie_id: MovieId,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub interaction_count: u64,
}

/// Time-window configuration for case construction and the embedding
/// baseline's history lookback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Width of one release cohort in days.
    pub cohort_period_days: u32,
    /// Label window after release, in days.
    pub observe_horizon_days: u32,
    /// Popularity-history lookback for the embedding baseline, in weeks.
    pub history_weeks: u32,
    /// How many popular history items feed the embedding centroid.
    pub centroid_top_n: u32,
    /// Maximum ground-truth label list length per case.
    pub label_list_size: u32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            cohort_period_days: 7,
            observe_horizon_days: 28,
            history_weeks: 4,
            centroid_top_n: 100,
            label_list_size: 3,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), CatalogError> {
        let fields = [
            ("cohort_period_days", self.cohort_period_days),
            ("observe_horizon_days", self.observe_horizon_days),
            ("history_weeks", self.history_weeks),
            ("centroid_top_n", self.centroid_top_n),
            ("label_list_size", self.label_list_size),
        ];
        for (name, value) in fields {
            if value == 0 {
                return Err(CatalogError::InvalidConfig {
                    field: name,
                    reason: "must be positive".into(),
                });
            }
        }
        Ok(())
    }
}

/// One ground-truth label: a movie that later became popular, with its
/// cohort-normalized popularity score in (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMovie {
    pub movie_id: MovieId,
    pub popularity_score: f64,
}

/// One evaluation cohort: new releases as candidates, later-popular movies
/// as ordered ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationCase {
    pub case_id: String,
    /// Date at which the prediction is made; candidate releases are on or
    /// after this date, popularity history is strictly before it.
    pub as_of_date: NaiveDate,
    pub candidates: Vec<MovieId>,
    pub ground_truth: Vec<LabeledMovie>,
    pub window_cfg: WindowConfig,
}

impl EvaluationCase {
    /// Construct a case, checking every invariant.
    pub fn new(
        case_id: String,
        as_of_date: NaiveDate,
        candidates: Vec<MovieId>,
        ground_truth: Vec<LabeledMovie>,
        window_cfg: WindowConfig,
    ) -> Result<Self, CatalogError> {
        let case = EvaluationCase {
            case_id,
            as_of_date,
            candidates,
            ground_truth,
            window_cfg,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let invalid = |reason: String| CatalogError::InvalidCase {
            case_id: self.case_id.clone(),
            reason,
        };
        if self.candidates.len() < 2 {
            return Err(invalid(format!(
                "needs at least 2 candidates, got {}",
                self.candidates.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &self.candidates {
            if !seen.insert(id) {
                return Err(invalid(format!("duplicate candidate {id}")));
            }
        }
        if self.ground_truth.is_empty() {
            return Err(invalid("empty ground truth".into()));
        }
        let mut seen_truth = std::collections::BTreeSet::new();
        for label in &self.ground_truth {
            if !seen.contains(&label.movie_id) {
                return Err(invalid(format!(
                    "ground-truth id {} is not a candidate",
                    label.movie_id
                )));
            }
            if !seen_truth.insert(&label.movie_id) {
                return Err(invalid(format!(
                    "duplicate ground-truth id {}",
                    label.movie_id
                )));
            }
            if !(label.popularity_score > 0.0 && label.popularity_score <= 1.0) {
                return Err(invalid(format!(
                    "popularity score {} for {} outside (0, 1]",
                    label.popularity_score, label.movie_id
                )));
            }
        }
        if self.ground_truth[0].popularity_score != 1.0 {
            return Err(invalid(format!(
                "top ground-truth score must be exactly 1.0, got {}",
                self.ground_truth[0].popularity_score
            )));
        }
        for pair in self.ground_truth.windows(2) {
            if pair[1].popularity_score > pair[0].popularity_score {
                return Err(invalid("ground truth not sorted by score descending".into()));
            }
        }
        Ok(())
    }

    /// Relevance map for NDCG: ground-truth ids get their popularity score,
    /// every other candidate has implicit relevance 0.
    pub fn relevance(&self) -> BTreeMap<MovieId, f64> {
        self.ground_truth
            .iter()
            .map(|l| (l.movie_id.clone(), l.popularity_score))
            .collect()
    }
}

/// Knowledge-cutoff description of a chat model, used to warn about
/// candidates the model may already know.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub model_id: String,
    pub knowledge_cutoff: NaiveDate,
    /// Required margin between cutoff and release, in days.
    pub cutoff_margin_days: i64,
}

impl ModelProfile {
    pub fn new(model_id: impl Into<String>, knowledge_cutoff: NaiveDate) -> Self {
        ModelProfile {
            model_id: model_id.into(),
            knowledge_cutoff,
            cutoff_margin_days: 180,
        }
    }
}

/// Warning emitted by [`check_cutoff`] for one too-early candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffWarning {
    pub movie_id: MovieId,
    pub release_date: NaiveDate,
    pub earliest_safe_date: NaiveDate,
}

impl fmt::Display for CutoffWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} released {} which is before {} (knowledge cutoff + margin); the model may know it",
            self.movie_id, self.release_date, self.earliest_safe_date
        )
    }
}

/// Warn about candidates released too close to the model's knowledge cutoff.
///
/// One warning per candidate whose release date is earlier than
/// `knowledge_cutoff + cutoff_margin_days`.
pub fn check_cutoff(
    case: &EvaluationCase,
    movies: &Catalog,
    profile: &ModelProfile,
) -> Vec<CutoffWarning> {
    let earliest_safe = profile.knowledge_cutoff + chrono::Days::new(profile.cutoff_margin_days.max(0) as u64);
    let mut warnings = Vec::new();
    for id in &case.candidates {
        if let Some(movie) = movies.get(id) {
            if movie.release_date < earliest_safe {
                warnings.push(CutoffWarning {
                    movie_id: id.clone(),
                    release_date: movie.release_date,
                    earliest_safe_date: earliest_safe,
                });
            }
        }
    }
    warnings
}

/// An id-indexed movie collection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    movies: BTreeMap<MovieId, MovieRecord>,
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    /// Build from records, rejecting duplicate ids and malformed credits.
    pub fn from_records(records: Vec<MovieRecord>) -> Result<Self, CatalogError> {
        let mut movies = BTreeMap::new();
        for record in records {
            record.validate()?;
            let id = record.movie_id.clone();
            if movies.insert(id.clone(), record).is_some() {
                return Err(CatalogError::DuplicateMovie { movie_id: id });
            }
        }
        Ok(Catalog { movies })
    }

    pub fn get(&self, id: &MovieId) -> Option<&MovieRecord> {
        self.movies.get(id)
    }

    pub fn len(&self) -> usize {
        self.movies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.movies.is_empty()
    }

    /// Movies in id order.
    pub fn iter(&self) -> impl Iterator<Item = &MovieRecord> {
        self.movies.values()
    }

    pub fn require(&self, id: &MovieId) -> Result<&MovieRecord, CatalogError> {
        self.get(id).ok_or_else(|| CatalogError::UnknownMovie {
            movie_id: id.clone(),
        })
    }
}

/// Metadata tier: cumulative levels of movie metadata used in prompts and
/// embeddings. V1 = genre only, V2 = synopsis only, V3 = V1 + V2 + content
/// rating, character types, mood and era, V4 = V3 + cast, crew and awards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    V1,
    V2,
    V3,
    V4,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::V1, Tier::V2, Tier::V3, Tier::V4];
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tier::V1 => "V1",
            Tier::V2 => "V2",
            Tier::V3 => "V3",
            Tier::V4 => "V4",
        };
        f.write_str(s)
    }
}

impl FromStr for Tier {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "V1" => Ok(Tier::V1),
            "V2" => Ok(Tier::V2),
            "V3" => Ok(Tier::V3),
            "V4" => Ok(Tier::V4),
            other => Err(CatalogError::InvalidConfig {
                field: "tier",
                reason: format!("unknown tier {other:?}, expected V1..V4"),
            }),
        }
    }
}

/// Errors from catalog construction, case building and rendering.
#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("duplicate movie id {movie_id}")]
    DuplicateMovie { movie_id: MovieId },

    #[error("unknown movie id {movie_id}")]
    UnknownMovie { movie_id: MovieId },

    #[error("movie {movie_id}: duplicate billing order {billing_order} for role {role}")]
    DuplicateBilling {
        movie_id: MovieId,
        role: CreditRole,
        billing_order: u32,
    },

    #[error("empty catalog")]
    EmptyCatalog,

    #[error("movie {movie_id}: missing required field `{field}` for tier {tier}")]
    MissingField {
        movie_id: MovieId,
        field: &'static str,
        tier: Tier,
    },

    #[error("movie {movie_id}: observations do not cover {window_start}..={window_end}")]
    MissingCoverage {
        movie_id: MovieId,
        window_start: NaiveDate,
        window_end: NaiveDate,
    },

    #[error("duplicate observation for {movie_id} over {window_start}..={window_end}")]
    DuplicateObservation {
        movie_id: MovieId,
        window_start: NaiveDate,
        window_end: NaiveDate,
    },

    #[error("invalid observation window for {movie_id}: {window_start} > {window_end}")]
    InvalidWindow {
        movie_id: MovieId,
        window_start: NaiveDate,
        window_end: NaiveDate,
    },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid case {case_id}: {reason}")]
    InvalidCase { case_id: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {source}")]
    Parse {
        path: std::path::PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn case_with(candidates: &[&str], truth: &[(&str, f64)]) -> Result<EvaluationCase, CatalogError> {
        EvaluationCase::new(
            "c0".into(),
            date("2024-01-01"),
            candidates.iter().map(|s| MovieId::from(*s)).collect(),
            truth
                .iter()
                .map(|(id, score)| LabeledMovie {
                    movie_id: MovieId::from(*id),
                    popularity_score: *score,
                })
                .collect(),
            WindowConfig::default(),
        )
    }

    #[test]
    fn case_invariants_hold() {
        assert!(case_with(&["a", "b", "c"], &[("a", 1.0), ("b", 0.5)]).is_ok());
    }

    #[test]
    fn case_rejects_truth_outside_candidates() {
        let err = case_with(&["a", "b"], &[("z", 1.0)]).unwrap_err();
        assert!(err.to_string().contains("not a candidate"));
    }

    #[test]
    fn case_rejects_top_score_not_one() {
        let err = case_with(&["a", "b"], &[("a", 0.9)]).unwrap_err();
        assert!(err.to_string().contains("exactly 1.0"));
    }

    #[test]
    fn case_rejects_unsorted_truth() {
        let err = case_with(&["a", "b", "c"], &[("a", 1.0), ("b", 0.2), ("c", 0.6)]).unwrap_err();
        assert!(err.to_string().contains("descending"));
    }

    #[test]
    fn case_rejects_single_candidate() {
        assert!(case_with(&["a"], &[("a", 1.0)]).is_err());
    }

    #[test]
    fn catalog_rejects_duplicate_ids() {
        let movie = crate::catalog::synth::test_movie("m1", date("2024-03-01"));
        let err = Catalog::from_records(vec![movie.clone(), movie]).unwrap_err();
        assert!(matches!(err, CatalogError::DuplicateMovie { .. }));
    }

    #[test]
    fn catalog_rejects_duplicate_billing_per_role() {
        let mut movie = crate::catalog::synth::test_movie("m1", date("2024-03-01"));
        movie.cast.push(PersonCredit {
            name: "Second Lead".into(),
            role: CreditRole::Cast,
            billing_order: 0,
            award_count: 0,
        });
        let err = Catalog::from_records(vec![movie]).unwrap_err();
        assert!(matches!(err, CatalogError::DuplicateBilling { .. }));
    }

    #[test]
    fn cutoff_margin_respected() {
        // 2024-08-01 is 244 days past a 2023-12-01 cutoff: no warning.
        // 2024-01-15 is 45 days past it: one warning.
        let profile = ModelProfile::new("m", date("2023-12-01"));
        assert_eq!(profile.cutoff_margin_days, 180);

        let late = crate::catalog::synth::test_movie("late", date("2024-08-01"));
        let early = crate::catalog::synth::test_movie("early", date("2024-01-15"));
        let catalog = Catalog::from_records(vec![late, early]).unwrap();

        let case = case_with(&["late", "early"], &[("late", 1.0)]).unwrap();
        let warnings = check_cutoff(&case, &catalog, &profile);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].movie_id.as_str(), "early");
        assert_eq!(warnings[0].earliest_safe_date, date("2024-05-29"));
    }

    #[test]
    fn tier_parses_case_insensitively() {
        assert_eq!("v3".parse::<Tier>().unwrap(), Tier::V3);
        assert!("V9".parse::<Tier>().is_err());
    }
}

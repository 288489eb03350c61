//! Deterministic synthetic catalog generator.
//!
//! Stands in for platform release logs: every movie gets a latent quality
//! and a genre affinity, and weekly interaction counts are drawn as
//! `round(exp(base + a*quality + b*affinity + noise) * decay^week)`. That
//! makes popularity statistically predictable from metadata (the embedding
//! baseline can beat random) without being deterministic.

use chrono::{Datelike, Days, NaiveDate};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Catalog, CatalogError, CreditRole, MovieId, MovieRecord, PersonCredit, PopularityObservation,
};

const TITLE_ADJECTIVES: &[&str] = &[
    "Crimson", "Silent", "Golden", "Broken", "Hidden", "Midnight", "Electric", "Paper", "Wild",
    "Frozen", "Restless", "Hollow", "Velvet", "Iron", "Distant",
];

const TITLE_NOUNS: &[&str] = &[
    "Harbor", "Voyage", "Letters", "Garden", "Signal", "Orchard", "Divide", "Covenant", "Mirage",
    "Summit", "Reckoning", "Lanterns", "Currents", "Frontier", "Echoes",
];

const FIRST_NAMES: &[&str] = &[
    "Alice", "Ben", "Clara", "Diego", "Elena", "Farid", "Grace", "Hugo", "Iris", "Jonas", "Keiko",
    "Luca", "Mara", "Nadia", "Omar", "Priya", "Quentin", "Rosa", "Sven", "Talia",
];

const LAST_NAMES: &[&str] = &[
    "Monroe", "Ortiz", "Ng", "Ivanov", "Sato", "Keller", "Adeyemi", "Lindqvist", "Romano",
    "Haddad", "Fischer", "Osei", "Novak", "Marchetti", "Byrne", "Castillo",
];

const SYNOPSIS_SUBJECTS: &[&str] = &[
    "a retired detective",
    "an ambitious chef",
    "two estranged siblings",
    "a small-town mechanic",
    "a touring musician",
    "an undercover journalist",
    "a first-time captain",
    "a reclusive painter",
];

const SYNOPSIS_GOALS: &[&str] = &[
    "a conspiracy that reaches city hall",
    "a second chance at an old dream",
    "a fortune buried by the previous owner",
    "a rival from a forgotten past",
    "a storm that cuts the town off",
    "a secret kept for thirty years",
];

/// Knobs for [`synthesize_catalog`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Number of movies to generate (at least 2).
    pub movie_count: u32,
    /// Releases are spread uniformly over this many days.
    pub span_days: u32,
    /// Weekly observation windows emitted per movie after release.
    pub observation_weeks: u32,
    /// First possible release date.
    pub start_date: NaiveDate,
    pub genres: Vec<String>,
    pub moods: Vec<String>,
    pub character_types: Vec<String>,
    pub content_ratings: Vec<String>,
    /// Weight of the latent quality in the interaction-rate exponent.
    pub quality_weight: f64,
    /// Weight of the genre affinity in the interaction-rate exponent.
    pub affinity_weight: f64,
    /// Stddev of the per-week log-rate noise.
    pub noise_sigma: f64,
    /// Intercept of the log interaction rate.
    pub base_rate: f64,
    /// Multiplicative weekly decay of the interaction rate.
    pub weekly_decay: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            movie_count: 240,
            span_days: 364,
            observation_weeks: 12,
            start_date: NaiveDate::from_ymd_opt(2024, 1, 5).unwrap(),
            genres: [
                "Drama", "Comedy", "Thriller", "Action", "Romance", "Horror", "Documentary",
                "Western", "Animation", "Mystery",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            moods: ["dark", "uplifting", "tense", "whimsical", "melancholic", "gritty"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            character_types: ["antihero", "mentor", "underdog", "trickster", "loner", "idealist"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            content_ratings: ["G", "PG", "PG-13", "R"].iter().map(|s| s.to_string()).collect(),
            quality_weight: 0.8,
            affinity_weight: 2.2,
            noise_sigma: 0.35,
            base_rate: 3.5,
            weekly_decay: 0.85,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<(), CatalogError> {
        if self.movie_count < 2 {
            return Err(CatalogError::InvalidConfig {
                field: "movie_count",
                reason: format!("must be at least 2, got {}", self.movie_count),
            });
        }
        for (field, list) in [
            ("genres", &self.genres),
            ("moods", &self.moods),
            ("character_types", &self.character_types),
            ("content_ratings", &self.content_ratings),
        ] {
            if list.is_empty() {
                return Err(CatalogError::InvalidConfig {
                    field,
                    reason: "vocabulary must not be empty".into(),
                });
            }
        }
        if self.span_days == 0 || self.observation_weeks == 0 {
            return Err(CatalogError::InvalidConfig {
                field: "span_days",
                reason: "span_days and observation_weeks must be positive".into(),
            });
        }
        Ok(())
    }

    /// Genres earlier in the vocabulary are "hotter": affinity runs
    /// linearly from 1.0 down to 0.0 across the list.
    fn genre_affinity(&self, genre: &str) -> f64 {
        let n = self.genres.len();
        match self.genres.iter().position(|g| g == genre) {
            Some(i) if n > 1 => 1.0 - i as f64 / (n - 1) as f64,
            Some(_) => 1.0,
            None => 0.0,
        }
    }
}

/// Generate a deterministic catalog and its interaction observations.
///
/// Identical `(cfg, seed)` inputs produce byte-identical output.
pub fn synthesize_catalog(
    cfg: &GenConfig,
    seed: u64,
) -> Result<(Catalog, Vec<PopularityObservation>), CatalogError> {
    let (catalog, observations, _) = synthesize_with_latents(cfg, seed)?;
    Ok((catalog, observations))
}

type SynthWithLatents = (Catalog, Vec<PopularityObservation>, Vec<(MovieId, f64)>);

/// Full generator output including each movie's latent quality, for
/// statistical checks in tests.
pub(crate) fn synthesize_with_latents(
    cfg: &GenConfig,
    seed: u64,
) -> Result<SynthWithLatents, CatalogError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut records = Vec::with_capacity(cfg.movie_count as usize);
    let mut observations = Vec::new();
    let mut latents = Vec::with_capacity(cfg.movie_count as usize);

    for index in 0..cfg.movie_count {
        let movie_id = MovieId::new(format!("m{index:04}"));
        let release_offset = rng.gen_range(0..cfg.span_days) as u64;
        let release_date = cfg.start_date + Days::new(release_offset);

        let quality = normal(&mut rng);
        let genre_count = 1 + rng.gen_range(0..=2);
        let genres = pick_distinct(&mut rng, &cfg.genres, genre_count);
        let affinity =
            genres.iter().map(|g| cfg.genre_affinity(g)).sum::<f64>() / genres.len() as f64;

        let mood_count = 1 + rng.gen_range(0..=1);
        let moods = pick_distinct(&mut rng, &cfg.moods, mood_count);
        let character_count = 1 + rng.gen_range(0..=1);
        let character_types = pick_distinct(&mut rng, &cfg.character_types, character_count);
        let content_rating = cfg.content_ratings[rng.gen_range(0..cfg.content_ratings.len())].clone();
        let era = format!("{}s", release_date.year() - release_date.year() % 10);

        let title = format!(
            "The {} {}",
            TITLE_ADJECTIVES[rng.gen_range(0..TITLE_ADJECTIVES.len())],
            TITLE_NOUNS[rng.gen_range(0..TITLE_NOUNS.len())]
        );
        let synopsis = format!(
            "A {} {} story about {} confronting {}.",
            moods[0],
            genres[0].to_lowercase(),
            SYNOPSIS_SUBJECTS[rng.gen_range(0..SYNOPSIS_SUBJECTS.len())],
            SYNOPSIS_GOALS[rng.gen_range(0..SYNOPSIS_GOALS.len())],
        );

        let cast_size = rng.gen_range(3..=5);
        let cast = (0..cast_size)
            .map(|billing| PersonCredit {
                name: person_name(&mut rng),
                role: CreditRole::Cast,
                billing_order: billing,
                // Award counts track quality so richer tiers carry signal.
                award_count: (quality * 2.0 + normal(&mut rng)).round().clamp(0.0, 8.0) as u32,
            })
            .collect();
        let crew = vec![
            PersonCredit {
                name: person_name(&mut rng),
                role: CreditRole::Director,
                billing_order: 0,
                award_count: (quality + normal(&mut rng)).round().clamp(0.0, 6.0) as u32,
            },
            PersonCredit {
                name: person_name(&mut rng),
                role: CreditRole::Writer,
                billing_order: 1,
                award_count: 0,
            },
        ];
        let awards = if quality > 0.8 {
            vec!["festival official selection".to_string()]
        } else {
            Vec::new()
        };

        records.push(MovieRecord {
            movie_id: movie_id.clone(),
            title,
            release_date,
            genres,
            synopsis,
            content_rating,
            era,
            mood: moods,
            character_types,
            cast,
            crew,
            awards,
        });

        for week in 0..cfg.observation_weeks {
            let window_start = release_date + Days::new(7 * week as u64);
            let window_end = window_start + Days::new(6);
            let log_rate = cfg.base_rate
                + cfg.quality_weight * quality
                + cfg.affinity_weight * affinity
                + cfg.noise_sigma * normal(&mut rng);
            let rate = log_rate.exp() * cfg.weekly_decay.powi(week as i32);
            observations.push(PopularityObservation {
                movie_id: movie_id.clone(),
                window_start,
                window_end,
                interaction_count: rate.round().max(0.0) as u64,
            });
        }

        latents.push((movie_id, quality));
    }

    let catalog = Catalog::from_records(records)?;
    Ok((catalog, observations, latents))
}

/// Standard normal draw via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn pick_distinct(rng: &mut ChaCha8Rng, vocab: &[String], count: usize) -> Vec<String> {
    let count = count.min(vocab.len());
    let mut indices: Vec<usize> = (0..vocab.len()).collect();
    indices.shuffle(rng);
    let mut picked: Vec<String> = indices[..count].iter().map(|&i| vocab[i].clone()).collect();
    picked.sort();
    picked
}

fn person_name(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{} {}",
        FIRST_NAMES[rng.gen_range(0..FIRST_NAMES.len())],
        LAST_NAMES[rng.gen_range(0..LAST_NAMES.len())]
    )
}

/// Minimal fully populated movie for unit tests.
#[cfg(test)]
pub(crate) fn test_movie(id: &str, release_date: NaiveDate) -> MovieRecord {
    MovieRecord {
        movie_id: MovieId::from(id),
        title: format!("Test {id}"),
        release_date,
        genres: vec!["Drama".into()],
        synopsis: "A test movie.".into(),
        content_rating: "PG".into(),
        era: "2020s".into(),
        mood: vec!["tense".into()],
        character_types: vec!["underdog".into()],
        cast: vec![PersonCredit {
            name: "Alice Monroe".into(),
            role: CreditRole::Cast,
            billing_order: 0,
            award_count: 1,
        }],
        crew: vec![PersonCredit {
            name: "Clara Ng".into(),
            role: CreditRole::Director,
            billing_order: 0,
            award_count: 0,
        }],
        awards: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn identical_seed_gives_identical_output() {
        let cfg = GenConfig::default();
        let (cat_a, obs_a) = synthesize_catalog(&cfg, 42).unwrap();
        let (cat_b, obs_b) = synthesize_catalog(&cfg, 42).unwrap();
        assert_eq!(cat_a, cat_b);
        assert_eq!(obs_a, obs_b);
    }

    #[test]
    fn different_seeds_give_different_counts() {
        let cfg = GenConfig::default();
        let (_, obs_1) = synthesize_catalog(&cfg, 1).unwrap();
        let (_, obs_2) = synthesize_catalog(&cfg, 2).unwrap();
        let counts = |obs: &[PopularityObservation]| -> Vec<u64> {
            obs.iter().map(|o| o.interaction_count).collect()
        };
        assert_ne!(counts(&obs_1), counts(&obs_2));
    }

    #[test]
    fn rejects_tiny_catalogs() {
        let cfg = GenConfig {
            movie_count: 1,
            ..GenConfig::default()
        };
        assert!(synthesize_catalog(&cfg, 0).is_err());
    }

    #[test]
    fn movies_render_at_every_tier() {
        let cfg = GenConfig {
            movie_count: 20,
            ..GenConfig::default()
        };
        let (catalog, _) = synthesize_catalog(&cfg, 7).unwrap();
        for movie in catalog.iter() {
            for tier in crate::catalog::Tier::ALL {
                crate::catalog::render_metadata(movie, tier).unwrap();
            }
        }
    }

    /// Rank correlation between the latent quality and total interactions
    /// must be positive: popularity is predictable, not arbitrary.
    #[test]
    fn quality_predicts_interactions() {
        let cfg = GenConfig {
            movie_count: 500,
            ..GenConfig::default()
        };
        let (_, observations, latents) = synthesize_with_latents(&cfg, 9).unwrap();

        let mut totals: BTreeMap<&MovieId, u64> = BTreeMap::new();
        for obs in &observations {
            *totals.entry(&obs.movie_id).or_default() += obs.interaction_count;
        }
        let qualities: Vec<f64> = latents.iter().map(|(_, q)| *q).collect();
        let counts: Vec<f64> = latents.iter().map(|(id, _)| totals[id] as f64).collect();

        let rho = spearman(&qualities, &counts);
        assert!(rho > 0.2, "rank correlation too weak: {rho}");
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let ra = ranks(a);
        let rb = ranks(b);
        let n = ra.len() as f64;
        let mean = (n - 1.0) / 2.0;
        let mut cov = 0.0;
        let mut var_a = 0.0;
        let mut var_b = 0.0;
        for (x, y) in ra.iter().zip(&rb) {
            cov += (x - mean) * (y - mean);
            var_a += (x - mean).powi(2);
            var_b += (y - mean).powi(2);
        }
        cov / (var_a.sqrt() * var_b.sqrt())
    }

    fn ranks(values: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
        let mut out = vec![0.0; values.len()];
        for (rank, &i) in order.iter().enumerate() {
            out[i] = rank as f64;
        }
        out
    }
}

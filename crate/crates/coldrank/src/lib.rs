//! Benchmark harness for cold-start movie popularity ranking.
//!
//! Newly released movies have no interaction history, so conventional
//! popularity models have nothing to go on. This crate ranks cohorts of new
//! releases by their future popularity using tiered metadata, and evaluates
//! several ranking strategies against each other:
//!
//! - `listwise` / `pairwise` — chat-model rankers ([`ranker`]) driven through
//!   a uniform backend interface ([`backend`]) with offline oracle backends
//!   for testing and an HTTP backend for hosted models,
//! - `pe` — a popularity-embedding baseline ([`embed`]) that scores candidates
//!   by cosine similarity to the centroid of recently popular items,
//! - `random` — a seeded random permutation baseline ([`metrics`]).
//!
//! Evaluation cases are built from release logs or generated synthetically
//! ([`catalog`]), predictions are scored with ACC@1, reciprocal rank, NDCG@k
//! and Recall@k ([`metrics`]), and multi-trial experiments with percent
//! improvement reports are orchestrated by [`experiment`] and rendered by
//! [`report`].
//!
//! Data-parallel inner loops (per-case ranking, per-movie embedding, Monte
//! Carlo baselines) run on rayon when the `parallel` feature is enabled
//! (default) and fall back to sequential iteration otherwise; outputs are
//! identical either way.

pub mod backend;
pub mod catalog;
pub mod embed;
pub mod experiment;
pub mod metrics;
pub mod par;
pub mod ranker;
pub mod report;

pub use catalog::{
    Catalog, EvaluationCase, GenConfig, LabeledMovie, ModelProfile, MovieId, MovieRecord,
    PersonCredit, PopularityObservation, Tier, WindowConfig,
};
pub use metrics::MetricVector;
pub use ranker::{ParseOutcome, RankedPrediction, Strategy};

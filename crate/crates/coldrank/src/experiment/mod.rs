//! Multi-trial experiment orchestration.
//!
//! One run evaluates every (strategy, tier) cell over `n_trials` trials.
//! Per trial, each case's candidate presentation is reshuffled with a
//! seeded permutation, the strategy ranks every case (in parallel), the
//! baseline ranks the same cases, and per-case metrics are averaged over
//! the cases where both sides produced a prediction. Failed cases are
//! excluded pairwise from both means and surface as a failure-rate column,
//! never silently.
//!
//! Everything that feeds the report is derived from explicit seeds and
//! digests, so a rerun with the same manifest inputs and a warm cache is
//! byte-identical.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{sha256_hex, ChatBackend};
use crate::catalog::{
    Catalog, EvaluationCase, MovieRecord, PopularityObservation, Tier, WindowConfig,
};
use crate::embed::{pe_rank, select_history, EmbedError, EmbeddingBackend};
use crate::metrics::{
    aggregate_trials, case_metrics, improvement_report, random_rank, MetricVector, MetricsError,
};
use crate::par;
use crate::ranker::{
    listwise_rank, pairwise_rank, shuffle_candidates, RankConfig, RankError, RankedPrediction,
    Strategy,
};
use crate::report::{CellReport, RunReport, REPORT_SCHEMA_VERSION};

/// Which baseline the improvement columns compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineSel {
    Random,
    Pe,
}

impl std::fmt::Display for BaselineSel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaselineSel::Random => "random",
            BaselineSel::Pe => "pe",
        })
    }
}

impl std::str::FromStr for BaselineSel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(BaselineSel::Random),
            "pe" => Ok(BaselineSel::Pe),
            other => Err(format!("unknown baseline {other:?}, expected random|pe")),
        }
    }
}

/// Declarative experiment description; mirrors the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub window: WindowConfig,
    pub tiers: Vec<Tier>,
    pub strategies: Vec<Strategy>,
    pub baseline: BaselineSel,
    pub trials: u32,
    pub metric_k: usize,
    pub max_concurrency: usize,
    pub retries: u32,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            window: WindowConfig::default(),
            tiers: vec![Tier::V4],
            strategies: vec![Strategy::Listwise],
            baseline: BaselineSel::Random,
            trials: 10,
            metric_k: 3,
            max_concurrency: 4,
            retries: 3,
            temperature: 0.2,
            max_tokens: 1024,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials < 1 {
            return Err(ExperimentError::InvalidConfig("trials must be >= 1".into()));
        }
        if self.tiers.is_empty() {
            return Err(ExperimentError::InvalidConfig("no tiers selected".into()));
        }
        if self.strategies.is_empty() {
            return Err(ExperimentError::InvalidConfig("no strategies selected".into()));
        }
        if self.metric_k < 1 {
            return Err(ExperimentError::InvalidConfig("metric_k must be >= 1".into()));
        }
        self.window
            .validate()
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))
    }
}

/// The three seeds a run depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    /// Seed the dataset was generated with (0 for ingested data).
    pub dataset: u64,
    /// Base seed for per-trial candidate reshuffles.
    pub shuffle: u64,
    /// Base seed for trials; trial t uses `trial_base + t`.
    pub trial_base: u64,
}

impl Default for SeedSet {
    fn default() -> Self {
        SeedSet {
            dataset: 7,
            shuffle: 11,
            trial_base: 1000,
        }
    }
}

/// Everything needed to replay a run byte-identically (plus warm cache).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub timestamp: String,
    pub config_digest: String,
    pub dataset_digest: String,
    pub backend_id: String,
    pub model_id: String,
    pub strategies: Vec<Strategy>,
    pub tiers: Vec<Tier>,
    pub seeds: SeedSet,
    pub n_trials: u32,
    pub software_version: String,
}

/// A finished run: machine-readable report plus its manifest.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub manifest: RunManifest,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("no evaluation cases to run")]
    NoCases,

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Metrics(#[from] MetricsError),

    #[error("ranking aborted: {0}")]
    Aborted(String),
}

/// Borrowed inputs for one run.
pub struct ExperimentInputs<'a> {
    pub catalog: &'a Catalog,
    pub observations: &'a [PopularityObservation],
    pub cases: &'a [EvaluationCase],
    pub chat: &'a dyn ChatBackend,
    pub embed: &'a dyn EmbeddingBackend,
}

/// Per-case outcome inside one trial.
enum CaseAttempt {
    Ranked(RankedPrediction),
    Failed(String),
}

/// Run every (strategy, tier) cell and assemble the report and manifest.
pub fn run_experiment(
    inputs: &ExperimentInputs<'_>,
    cfg: &ExperimentConfig,
    seeds: &SeedSet,
) -> Result<RunOutcome, ExperimentError> {
    cfg.validate()?;
    if inputs.cases.is_empty() {
        return Err(ExperimentError::NoCases);
    }

    // Histories are per as-of date; compute once per case if any PE is involved.
    let needs_pe = cfg.baseline == BaselineSel::Pe
        || cfg.strategies.contains(&Strategy::Pe);
    let histories: BTreeMap<&str, Vec<MovieRecord>> = if needs_pe {
        inputs
            .cases
            .iter()
            .map(|case| {
                (
                    case.case_id.as_str(),
                    select_history(inputs.catalog, inputs.observations, case.as_of_date, &cfg.window),
                )
            })
            .collect()
    } else {
        BTreeMap::new()
    };

    let mut cells = Vec::new();
    for &strategy in &cfg.strategies {
        for &tier in &cfg.tiers {
            cells.push(run_cell(inputs, cfg, seeds, strategy, tier, &histories)?);
        }
    }

    let config_digest = sha256_hex(
        format!(
            "{}\x1f{}",
            serde_json::to_string(cfg).expect("config serializes"),
            serde_json::to_string(seeds).expect("seeds serialize"),
        )
        .as_bytes(),
    );
    let dataset_digest = dataset_digest(inputs.catalog, inputs.observations);
    let software_version = env!("CARGO_PKG_VERSION").to_string();
    let run_id = sha256_hex(
        format!(
            "{config_digest}\x1f{dataset_digest}\x1f{}\x1f{}\x1f{software_version}",
            inputs.chat.backend_id(),
            inputs.chat.model_id(),
        )
        .as_bytes(),
    )[..16]
        .to_string();

    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        run_id: run_id.clone(),
        baseline_id: cfg.baseline.to_string(),
        metric_k: cfg.metric_k,
        cells,
    };
    let manifest = RunManifest {
        run_id,
        timestamp: chrono::Utc::now().to_rfc3339(),
        config_digest,
        dataset_digest,
        backend_id: inputs.chat.backend_id().to_string(),
        model_id: inputs.chat.model_id().to_string(),
        strategies: cfg.strategies.clone(),
        tiers: cfg.tiers.clone(),
        seeds: *seeds,
        n_trials: cfg.trials,
        software_version,
    };
    Ok(RunOutcome { report, manifest })
}

/// Digest over the serialized catalog and observations.
pub fn dataset_digest(catalog: &Catalog, observations: &[PopularityObservation]) -> String {
    let mut material = String::new();
    for movie in catalog.iter() {
        material.push_str(&serde_json::to_string(movie).expect("movie serializes"));
        material.push('\n');
    }
    for obs in observations {
        material.push_str(&serde_json::to_string(obs).expect("observation serializes"));
        material.push('\n');
    }
    sha256_hex(material.as_bytes())
}

fn run_cell(
    inputs: &ExperimentInputs<'_>,
    cfg: &ExperimentConfig,
    seeds: &SeedSet,
    strategy: Strategy,
    tier: Tier,
    histories: &BTreeMap<&str, Vec<MovieRecord>>,
) -> Result<CellReport, ExperimentError> {
    let n_cases = inputs.cases.len();
    let mut model_trials: Vec<MetricVector> = Vec::new();
    let mut baseline_trials: Vec<MetricVector> = Vec::new();
    let mut model_case_ids: Vec<String> = Vec::new();
    let mut baseline_case_ids: Vec<String> = Vec::new();
    let mut model_failures = 0usize;

    for trial in 0..cfg.trials {
        let trial_seed = seeds.trial_base + trial as u64;

        let attempts: Vec<Result<CaseAttempt, ExperimentError>> =
            par::map(inputs.cases, |case| {
                rank_case(inputs, cfg, seeds, strategy, tier, trial, trial_seed, case, histories)
            });

        let mut survivors: Vec<(&EvaluationCase, RankedPrediction)> = Vec::new();
        for (case, attempt) in inputs.cases.iter().zip(attempts) {
            match attempt? {
                CaseAttempt::Ranked(prediction) => survivors.push((case, prediction)),
                CaseAttempt::Failed(detail) => {
                    model_failures += 1;
                    log::warn!("trial {trial}: {detail}");
                }
            }
        }

        // Baseline on the model's surviving cases; a baseline failure drops
        // the case from both sides.
        let mut paired: Vec<(&EvaluationCase, RankedPrediction, RankedPrediction)> = Vec::new();
        for (case, model_prediction) in survivors {
            match baseline_prediction(inputs, cfg, strategy, tier, trial_seed, case, histories) {
                Ok(baseline) => paired.push((case, model_prediction, baseline)),
                Err(detail) => log::warn!(
                    "trial {trial}: baseline failed on case {}: {detail}",
                    case.case_id
                ),
            }
        }

        if paired.is_empty() {
            continue;
        }

        let mut model_case_metrics = Vec::with_capacity(paired.len());
        let mut baseline_case_metrics = Vec::with_capacity(paired.len());
        for (case, model_prediction, baseline) in &paired {
            model_case_metrics.push(case_metrics(&model_prediction.ordering, case, cfg.metric_k)?);
            baseline_case_metrics.push(case_metrics(&baseline.ordering, case, cfg.metric_k)?);
            model_case_ids.push(format!("t{trial}:{}", case.case_id));
            baseline_case_ids.push(format!("t{trial}:{}", case.case_id));
        }
        model_trials.push(crate::metrics::mean_metrics(&model_case_metrics)?);
        baseline_trials.push(crate::metrics::mean_metrics(&baseline_case_metrics)?);
    }

    let attempts_total = cfg.trials as usize * n_cases;
    let failure_rate = model_failures as f64 / attempts_total as f64;
    let failed = failure_rate > 0.5 || model_trials.is_empty();

    let zero = MetricVector {
        acc_at_1: 0.0,
        rr: 0.0,
        ndcg_at_k: 0.0,
        recall_at_k: 0.0,
        k: cfg.metric_k,
    };
    let (model_stats, baseline_stats) = if model_trials.is_empty() {
        (
            crate::metrics::TrialStats { mean: zero, std: zero, n_trials: 0 },
            crate::metrics::TrialStats { mean: zero, std: zero, n_trials: 0 },
        )
    } else {
        (
            aggregate_trials(&model_trials)?,
            aggregate_trials(&baseline_trials)?,
        )
    };

    let improvement = improvement_report(
        &model_stats.mean,
        &baseline_stats.mean,
        &model_case_ids,
        &baseline_case_ids,
        inputs.chat.model_id(),
        &cfg.baseline.to_string(),
        tier,
        model_stats.n_trials,
        failure_rate,
    )?;

    Ok(CellReport {
        model_id: model_label(inputs, strategy),
        strategy,
        tier,
        n_trials: model_stats.n_trials,
        n_cases,
        failure_rate,
        failed,
        metrics_mean: model_stats.mean,
        metrics_std: model_stats.std,
        baseline_mean: baseline_stats.mean,
        improvement: improvement.values,
    })
}

/// Offline strategies carry their own label; chat strategies use the model.
fn model_label(inputs: &ExperimentInputs<'_>, strategy: Strategy) -> String {
    match strategy {
        Strategy::Listwise | Strategy::Pairwise => inputs.chat.model_id().to_string(),
        Strategy::Pe => inputs.embed.backend_id().to_string(),
        Strategy::Random => "random".to_string(),
    }
}

#[allow(clippy::too_many_arguments)]
fn rank_case(
    inputs: &ExperimentInputs<'_>,
    cfg: &ExperimentConfig,
    seeds: &SeedSet,
    strategy: Strategy,
    tier: Tier,
    trial: u32,
    trial_seed: u64,
    case: &EvaluationCase,
    histories: &BTreeMap<&str, Vec<MovieRecord>>,
) -> Result<CaseAttempt, ExperimentError> {
    let presentation_seed = mix_seed(seeds.shuffle, &[&trial.to_string(), &case.case_id]);
    let presented = shuffle_candidates(case, presentation_seed);

    match strategy {
        Strategy::Random => Ok(CaseAttempt::Ranked(random_rank(
            &presented,
            mix_seed(trial_seed, &["random", &case.case_id]),
        ))),
        Strategy::Pe => {
            let history = &histories[case.case_id.as_str()];
            match pe_rank(&presented, inputs.catalog, history, inputs.embed, tier) {
                Ok(prediction) => Ok(CaseAttempt::Ranked(prediction)),
                Err(EmbedError::EmptyHistory) => Ok(CaseAttempt::Failed(format!(
                    "case {}: no popularity history before {}",
                    case.case_id, case.as_of_date
                ))),
                Err(e) => Err(ExperimentError::Aborted(e.to_string())),
            }
        }
        Strategy::Listwise | Strategy::Pairwise => {
            let rank_cfg = RankConfig {
                tier,
                retries: cfg.retries,
                trial_seed,
                temperature: cfg.temperature,
                max_tokens: cfg.max_tokens,
                templates: crate::ranker::PromptTemplates::default(),
            };
            let result = if strategy == Strategy::Listwise {
                listwise_rank(&presented, inputs.catalog, &inputs.chat, &rank_cfg)
            } else {
                pairwise_rank(&presented, inputs.catalog, &inputs.chat, &rank_cfg)
            };
            match result {
                Ok(prediction) => Ok(CaseAttempt::Ranked(prediction)),
                Err(RankError::CaseFailed(failure)) => Ok(CaseAttempt::Failed(failure.to_string())),
                Err(e) => Err(ExperimentError::Aborted(e.to_string())),
            }
        }
    }
}

/// The baseline's prediction for one case (already reshuffled upstream is
/// irrelevant: baselines read the case directly).
fn baseline_prediction(
    inputs: &ExperimentInputs<'_>,
    cfg: &ExperimentConfig,
    strategy: Strategy,
    tier: Tier,
    trial_seed: u64,
    case: &EvaluationCase,
    histories: &BTreeMap<&str, Vec<MovieRecord>>,
) -> Result<RankedPrediction, String> {
    match cfg.baseline {
        BaselineSel::Random => Ok(random_rank(
            case,
            mix_seed(trial_seed, &["baseline", &case.case_id]),
        )),
        BaselineSel::Pe => {
            // When PE is also the strategy under test, comparing it to
            // itself is intentional and yields zero improvement.
            let _ = strategy;
            let history = &histories[case.case_id.as_str()];
            pe_rank(case, inputs.catalog, history, inputs.embed, tier).map_err(|e| e.to_string())
        }
    }
}

/// Deterministic seed mixing via FNV-1a over the parts.
pub fn mix_seed(base: u64, parts: &[&str]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325 ^ base;
    for part in parts {
        for &b in part.as_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash ^= 0x1f;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::OracleBackend;
    use crate::catalog::{build_cases, synthesize_catalog, GenConfig};
    use crate::embed::MockEmbedding;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            trials: 2,
            tiers: vec![Tier::V1],
            strategies: vec![Strategy::Listwise],
            ..ExperimentConfig::default()
        }
    }

    fn fixture() -> (Catalog, Vec<PopularityObservation>, Vec<EvaluationCase>) {
        let gen = GenConfig {
            movie_count: 60,
            span_days: 84,
            ..GenConfig::default()
        };
        let (catalog, observations) = synthesize_catalog(&gen, 3).unwrap();
        let out = build_cases(&catalog, &observations, &WindowConfig::default()).unwrap();
        (catalog, observations, out.cases)
    }

    #[test]
    fn oracle_run_scores_perfect_metrics_and_beats_random() {
        let (catalog, observations, cases) = fixture();
        let oracle = OracleBackend::new(&cases);
        let embed = MockEmbedding::new();
        let inputs = ExperimentInputs {
            catalog: &catalog,
            observations: &observations,
            cases: &cases,
            chat: &oracle,
            embed: &embed,
        };
        let outcome = run_experiment(&inputs, &small_cfg(), &SeedSet::default()).unwrap();
        let cell = &outcome.report.cells[0];
        assert_eq!(cell.metrics_mean.acc_at_1, 1.0);
        assert_eq!(cell.metrics_mean.rr, 1.0);
        assert_eq!(cell.metrics_mean.ndcg_at_k, 1.0);
        assert_eq!(cell.metrics_mean.recall_at_k, 1.0);
        assert_eq!(cell.failure_rate, 0.0);
        assert!(!cell.failed);
        for value in cell.improvement.as_array() {
            assert!(value.value > 0.0, "oracle should beat random: {value:?}");
        }
    }

    #[test]
    fn reports_are_deterministic_for_identical_inputs() {
        let (catalog, observations, cases) = fixture();
        let oracle = OracleBackend::new(&cases);
        let embed = MockEmbedding::new();
        let inputs = ExperimentInputs {
            catalog: &catalog,
            observations: &observations,
            cases: &cases,
            chat: &oracle,
            embed: &embed,
        };
        let cfg = small_cfg();
        let seeds = SeedSet::default();
        let a = run_experiment(&inputs, &cfg, &seeds).unwrap();
        let b = run_experiment(&inputs, &cfg, &seeds).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report).unwrap(),
            serde_json::to_string(&b.report).unwrap()
        );
        assert_eq!(a.manifest.run_id, b.manifest.run_id);
        assert_eq!(a.manifest.config_digest, b.manifest.config_digest);
    }

    #[test]
    fn defaults_follow_the_ten_trial_protocol() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.metric_k, 3);
        assert_eq!(cfg.baseline, BaselineSel::Random);
        assert!((cfg.temperature - 0.2).abs() < 1e-12);
    }

    #[test]
    fn empty_case_list_is_rejected() {
        let (catalog, observations, cases) = fixture();
        let oracle = OracleBackend::new(&cases);
        let embed = MockEmbedding::new();
        let inputs = ExperimentInputs {
            catalog: &catalog,
            observations: &observations,
            cases: &[],
            chat: &oracle,
            embed: &embed,
        };
        assert!(matches!(
            run_experiment(&inputs, &small_cfg(), &SeedSet::default()),
            Err(ExperimentError::NoCases)
        ));
    }

    #[test]
    fn pe_baseline_drops_history_less_cases_from_both_sides() {
        let (catalog, observations, cases) = fixture();
        let oracle = OracleBackend::new(&cases);
        let embed = MockEmbedding::new();
        let cfg = ExperimentConfig {
            strategies: vec![Strategy::Listwise],
            tiers: vec![Tier::V1],
            baseline: BaselineSel::Pe,
            trials: 2,
            ..ExperimentConfig::default()
        };
        let inputs = ExperimentInputs {
            catalog: &catalog,
            observations: &observations,
            cases: &cases,
            chat: &oracle,
            embed: &embed,
        };
        let outcome = run_experiment(&inputs, &cfg, &SeedSet::default()).unwrap();
        let cell = &outcome.report.cells[0];
        // The oracle is perfect on every surviving case; PE is not.
        assert_eq!(cell.metrics_mean.acc_at_1, 1.0);
        assert_eq!(outcome.report.baseline_id, "pe");
        assert!(cell.baseline_mean.acc_at_1 < 1.0);
        assert!(cell.improvement.acc_at_1.value > 0.0);
    }

    #[test]
    fn pe_against_itself_improves_by_exactly_zero() {
        let (catalog, observations, cases) = fixture();
        let oracle = OracleBackend::new(&cases);
        let embed = MockEmbedding::new();
        let cfg = ExperimentConfig {
            strategies: vec![Strategy::Pe],
            tiers: vec![Tier::V1],
            baseline: BaselineSel::Pe,
            trials: 2,
            ..ExperimentConfig::default()
        };
        let inputs = ExperimentInputs {
            catalog: &catalog,
            observations: &observations,
            cases: &cases,
            chat: &oracle,
            embed: &embed,
        };
        let outcome = run_experiment(&inputs, &cfg, &SeedSet::default()).unwrap();
        for value in outcome.report.cells[0].improvement.as_array() {
            assert_eq!(value.value, 0.0);
        }
    }

    #[test]
    fn random_strategy_against_random_baseline_hovers_near_zero() {
        let (catalog, observations, cases) = fixture();
        let oracle = OracleBackend::new(&cases);
        let embed = MockEmbedding::new();
        let inputs = ExperimentInputs {
            catalog: &catalog,
            observations: &observations,
            cases: &cases,
            chat: &oracle,
            embed: &embed,
        };
        let cfg = ExperimentConfig {
            strategies: vec![Strategy::Random],
            trials: 8,
            tiers: vec![Tier::V1],
            ..ExperimentConfig::default()
        };
        let outcome = run_experiment(&inputs, &cfg, &SeedSet::default()).unwrap();
        let cell = &outcome.report.cells[0];
        // Same distribution on both sides: improvements stay small.
        assert!(cell.improvement.rr.value.abs() < 60.0, "{:?}", cell.improvement);
    }
}

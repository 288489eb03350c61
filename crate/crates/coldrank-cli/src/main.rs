//! Command-line runner: dataset generation and validation, single-pass
//! ranking, full experiment runs with manifests, report merging and cache
//! maintenance.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 backend exhaustion.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use coldrank::backend::{
    cached, ChatBackend, EndpointConfig, HttpChatBackend, NoisyOracleBackend, OracleBackend,
    ResponseCache,
};
use coldrank::backend::testing::LexicographicBackend;
use coldrank::catalog::{
    build_cases, check_cutoff, load_catalog, load_observations, save_catalog, save_observations,
    save_skip_log, Catalog, EvaluationCase, GenConfig, ModelProfile, PopularityObservation, Tier,
    WindowConfig,
};
use coldrank::embed::{
    CachedEmbeddingBackend, EmbedEndpointConfig, EmbeddingBackend, HttpEmbeddingBackend,
    MockEmbedding,
};
use coldrank::experiment::{
    dataset_digest, mix_seed, run_experiment, BaselineSel, ExperimentConfig, ExperimentError,
    ExperimentInputs, SeedSet,
};
use coldrank::metrics::random_rank;
use coldrank::ranker::{listwise_rank, pairwise_rank, shuffle_candidates, RankConfig, Strategy};
use coldrank::report::{
    load_report, merge_reports, render_comparison_table, render_run_table, save_report,
};

#[derive(Parser)]
#[command(
    name = "coldrank",
    version,
    about = "Cold-start movie popularity ranking benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or validate datasets
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Rank every case once with one strategy and write predictions
    Rank(RankArgs),
    /// Run a multi-trial experiment and write report + manifest
    Eval(EvalArgs),
    /// Merge run reports into one comparison table
    Report(ReportArgs),
    /// Response-cache maintenance
    Cache {
        #[command(subcommand)]
        command: CacheCommand,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Generate a deterministic synthetic catalog + observations
    Synth(SynthArgs),
    /// Check an existing dataset and report case statistics
    Validate(ValidateArgs),
}

#[derive(Subcommand)]
enum CacheCommand {
    /// Delete every cached response
    Purge(PurgeArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for catalog.jsonl and observations.jsonl
    #[arg(long)]
    out: PathBuf,
    /// Generator seed
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of movies
    #[arg(long)]
    movies: Option<u32>,
    /// Days the releases are spread over
    #[arg(long)]
    span_days: Option<u32>,
    /// Full generator config as JSON (overrides --movies/--span-days)
    #[arg(long)]
    gen_config: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset directory (catalog.jsonl + observations.jsonl)
    #[arg(long)]
    data: PathBuf,
    /// Experiment config whose window settings drive case construction
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// Backend: oracle | noisy:<eps> | lexicographic | http
    #[arg(long)]
    backend: String,
    #[arg(long, default_value = "listwise")]
    strategy: Strategy,
    #[arg(long, default_value = "V4")]
    tier: Tier,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Retry attempts after the first per case (or per pair)
    #[arg(long, default_value_t = 3)]
    retries: u32,
    /// Model id override for the http backend
    #[arg(long)]
    model: Option<String>,
    /// Embedding backend for the pe strategy: mock | http
    #[arg(long, default_value = "mock")]
    embed_backend: String,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    max_concurrency: usize,
    /// Predictions output file (JSONL); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// Backend: oracle | noisy:<eps> | lexicographic | http
    #[arg(long)]
    backend: String,
    /// Experiment config file (JSON); flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tiers to evaluate (repeatable)
    #[arg(long = "tier")]
    tiers: Vec<Tier>,
    /// Strategies to evaluate (repeatable)
    #[arg(long = "strategy")]
    strategies: Vec<Strategy>,
    #[arg(long)]
    baseline: Option<BaselineSel>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    retries: Option<u32>,
    /// Model id override for the http backend
    #[arg(long)]
    model: Option<String>,
    /// Embedding backend: mock | http
    #[arg(long, default_value = "mock")]
    embed_backend: String,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    max_concurrency: Option<usize>,
    /// Warn about candidates released before cutoff + margin
    #[arg(long)]
    knowledge_cutoff: Option<chrono::NaiveDate>,
    #[arg(long, default_value_t = 180)]
    cutoff_margin_days: i64,
    /// Output directory for report.json, manifest.json, table.txt
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run report files to merge
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Write the rendered table here as well as stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PurgeArgs {
    #[arg(long)]
    cache_dir: PathBuf,
}

/// Error with a process exit code.
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    fn backend(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

impl From<coldrank::catalog::CatalogError> for CliError {
    fn from(e: coldrank::catalog::CatalogError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<coldrank::report::ReportError> for CliError {
    fn from(e: coldrank::report::ReportError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidConfig(_) => CliError::usage(e.to_string()),
            ExperimentError::Aborted(_) => CliError::backend(e.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; usage problems are exit code 1.
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Dataset { command } => match command {
            DatasetCommand::Synth(args) => cmd_dataset_synth(args),
            DatasetCommand::Validate(args) => cmd_dataset_validate(args),
        },
        Command::Rank(args) => cmd_rank(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Report(args) => cmd_report(args),
        Command::Cache { command } => match command {
            CacheCommand::Purge(args) => cmd_cache_purge(args),
        },
    }
}

fn cmd_dataset_synth(args: SynthArgs) -> Result<(), CliError> {
    let mut gen = match &args.gen_config {
        Some(path) => read_json::<GenConfig>(path)?,
        None => GenConfig::default(),
    };
    if let Some(movies) = args.movies {
        gen.movie_count = movies;
    }
    if let Some(span) = args.span_days {
        gen.span_days = span;
    }

    let (catalog, observations) = coldrank::catalog::synthesize_catalog(&gen, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    save_catalog(&args.out.join("catalog.jsonl"), &catalog)?;
    save_observations(&args.out.join("observations.jsonl"), &observations)?;

    println!("movies: {}", catalog.len());
    println!("observations: {}", observations.len());
    println!("dataset digest: {}", dataset_digest(&catalog, &observations));
    println!("written to {}", args.out.display());
    Ok(())
}

fn cmd_dataset_validate(args: ValidateArgs) -> Result<(), CliError> {
    let (catalog, observations) = load_dataset(&args.data)?;
    let window = match &args.config {
        Some(path) => read_json::<ExperimentConfig>(path)?.window,
        None => WindowConfig::default(),
    };
    let out = build_cases(&catalog, &observations, &window)?;
    println!("movies: {}", catalog.len());
    println!("observations: {}", observations.len());
    println!("cases: {}", out.cases.len());
    println!("skipped cohorts: {}", out.skipped.len());
    for skip in &out.skipped {
        println!("  {}: {}", skip.cohort_id, skip.reason);
    }
    println!("dataset digest: {}", dataset_digest(&catalog, &observations));
    Ok(())
}

fn cmd_rank(args: RankArgs) -> Result<(), CliError> {
    let (catalog, observations) = load_dataset(&args.data)?;
    let out = build_cases(&catalog, &observations, &WindowConfig::default())?;
    if out.cases.is_empty() {
        return Err(CliError::data("dataset produced no evaluation cases"));
    }

    let chat = make_chat_backend(
        &args.backend,
        &out.cases,
        args.model.as_deref(),
        args.cache_dir.as_deref(),
        args.max_concurrency,
    )?;
    let embed = make_embed_backend(&args.embed_backend, args.cache_dir.as_deref())?;

    let window = WindowConfig::default();
    let mut predictions = Vec::new();
    let mut failures = 0usize;
    for case in &out.cases {
        let presented = shuffle_candidates(case, mix_seed(args.seed, &["present", &case.case_id]));
        let result: Result<_, String> = match args.strategy {
            Strategy::Random => Ok(random_rank(&presented, mix_seed(args.seed, &[&case.case_id]))),
            Strategy::Pe => {
                let history = coldrank::embed::select_history(
                    &catalog,
                    &observations,
                    case.as_of_date,
                    &window,
                );
                coldrank::embed::pe_rank(&presented, &catalog, &history, &embed, args.tier)
                    .map_err(|e| e.to_string())
            }
            Strategy::Listwise | Strategy::Pairwise => {
                let cfg = RankConfig {
                    tier: args.tier,
                    retries: args.retries,
                    trial_seed: args.seed,
                    ..RankConfig::new(args.tier)
                };
                let ranked = if args.strategy == Strategy::Listwise {
                    listwise_rank(&presented, &catalog, &chat, &cfg)
                } else {
                    pairwise_rank(&presented, &catalog, &chat, &cfg)
                };
                ranked.map_err(|e| e.to_string())
            }
        };
        match result {
            Ok(prediction) => predictions.push(prediction),
            Err(e) => {
                failures += 1;
                log::warn!("case {}: {e}", case.case_id);
            }
        }
    }

    if predictions.is_empty() {
        return Err(CliError::backend(format!(
            "no case produced a valid prediction ({failures} failures)"
        )));
    }

    let mut body = String::new();
    for prediction in &predictions {
        body.push_str(&serde_json::to_string(prediction).expect("prediction serializes"));
        body.push('\n');
    }
    match &args.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    eprintln!(
        "ranked {} cases ({failures} failures) with {} / {}",
        predictions.len(),
        args.strategy,
        args.tier
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => read_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig::default(),
    };
    if !args.tiers.is_empty() {
        cfg.tiers = args.tiers.clone();
    }
    if !args.strategies.is_empty() {
        cfg.strategies = args.strategies.clone();
    }
    if let Some(baseline) = args.baseline {
        cfg.baseline = baseline;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(retries) = args.retries {
        cfg.retries = retries;
    }
    if let Some(max_concurrency) = args.max_concurrency {
        cfg.max_concurrency = max_concurrency;
    }

    let (catalog, observations) = load_dataset(&args.data)?;
    let built = build_cases(&catalog, &observations, &cfg.window)?;
    if built.cases.is_empty() {
        return Err(CliError::data("dataset produced no evaluation cases"));
    }

    let chat = make_chat_backend(
        &args.backend,
        &built.cases,
        args.model.as_deref(),
        args.cache_dir.as_deref(),
        cfg.max_concurrency,
    )?;
    let embed = make_embed_backend(&args.embed_backend, args.cache_dir.as_deref())?;

    if let Some(cutoff) = args.knowledge_cutoff {
        let profile = ModelProfile {
            model_id: chat.model_id().to_string(),
            knowledge_cutoff: cutoff,
            cutoff_margin_days: args.cutoff_margin_days,
        };
        for case in &built.cases {
            for warning in check_cutoff(case, &catalog, &profile) {
                log::warn!("case {}: {warning}", case.case_id);
            }
        }
    }

    let seeds = SeedSet {
        dataset: args.seed,
        shuffle: args.seed.wrapping_add(1),
        trial_base: args.seed.wrapping_add(2),
    };
    let inputs = ExperimentInputs {
        catalog: &catalog,
        observations: &observations,
        cases: &built.cases,
        chat: &chat,
        embed: &embed,
    };
    let outcome = run_experiment(&inputs, &cfg, &seeds)?;

    std::fs::create_dir_all(&args.out)?;
    save_report(&args.out.join("report.json"), &outcome.report)?;
    let manifest_body = serde_json::to_string_pretty(&outcome.manifest).expect("manifest serializes");
    std::fs::write(args.out.join("manifest.json"), manifest_body + "\n")?;
    save_skip_log(&args.out.join("skip_log.jsonl"), &built.skipped)?;

    let table = render_run_table(&outcome.report);
    std::fs::write(args.out.join("table.txt"), format!("{table}\n"))?;
    println!("run {} (baseline: {})", outcome.report.run_id, outcome.report.baseline_id);
    println!("{table}");
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let mut reports = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        reports.push(load_report(path)?);
    }
    let (rows, k) = merge_reports(&reports)?;
    let table = render_comparison_table(&rows, k);
    if let Some(path) = &args.out {
        std::fs::write(path, format!("{table}\n"))?;
    }
    println!("{table}");
    Ok(())
}

fn cmd_cache_purge(args: PurgeArgs) -> Result<(), CliError> {
    let removed = ResponseCache::new(&args.cache_dir).purge()?;
    println!("removed {removed} cache entries from {}", args.cache_dir.display());
    Ok(())
}

fn load_dataset(dir: &Path) -> Result<(Catalog, Vec<PopularityObservation>), CliError> {
    let catalog = load_catalog(&dir.join("catalog.jsonl"))?;
    let observations = load_observations(&dir.join("observations.jsonl"))?;
    Ok((catalog, observations))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&body)
        .map_err(|e| CliError::usage(format!("cannot parse {}: {e}", path.display())))
}

fn make_chat_backend(
    name: &str,
    cases: &[EvaluationCase],
    model_override: Option<&str>,
    cache_dir: Option<&Path>,
    max_concurrency: usize,
) -> Result<Box<dyn ChatBackend>, CliError> {
    let inner: Box<dyn ChatBackend> = if name == "oracle" {
        Box::new(OracleBackend::new(cases))
    } else if let Some(eps) = name.strip_prefix("noisy:") {
        let eps: f64 = eps
            .parse()
            .map_err(|_| CliError::usage(format!("bad noise level in backend {name:?}")))?;
        Box::new(NoisyOracleBackend::new(cases, eps))
    } else if name == "lexicographic" {
        Box::new(LexicographicBackend::new())
    } else if name == "http" {
        let mut cfg = EndpointConfig::from_env()
            .map_err(|e| CliError::usage(e.to_string()))?;
        if let Some(model) = model_override {
            cfg.model = model.to_string();
        }
        cfg.max_concurrency = max_concurrency;
        Box::new(HttpChatBackend::new(cfg))
    } else {
        return Err(CliError::usage(format!(
            "unknown backend {name:?}, expected oracle | noisy:<eps> | lexicographic | http"
        )));
    };

    Ok(match cache_dir {
        Some(dir) => Box::new(cached(inner, dir.join("chat"))),
        None => inner,
    })
}

fn make_embed_backend(
    name: &str,
    cache_dir: Option<&Path>,
) -> Result<Box<dyn EmbeddingBackend>, CliError> {
    match name {
        "mock" => Ok(Box::new(MockEmbedding::new())),
        "http" => {
            let cfg = EmbedEndpointConfig::from_env()
                .map_err(|e| CliError::usage(e.to_string()))?;
            let inner: Box<dyn EmbeddingBackend> = Box::new(HttpEmbeddingBackend::new(cfg));
            Ok(match cache_dir {
                Some(dir) => Box::new(CachedEmbeddingBackend::new(inner, dir.join("embed"))),
                None => inner,
            })
        }
        other => Err(CliError::usage(format!(
            "unknown embedding backend {other:?}, expected mock | http"
        ))),
    }
}

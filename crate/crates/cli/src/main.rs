use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use newsrank_core::eval::{model_name, EvalConfig};
use newsrank_core::features::FeatureConfig;
use newsrank_core::ingest::PublicationWindow;
use newsrank_core::models::{ForestOptions, ModelFile, Seq2SeqConfig, TrainSchedule};
use newsrank_core::pipeline::{
    evaluate_store, ingest_files, train_model, IngestOptions, ModelSpec, TrainOptions,
    DEFAULT_VALIDATION_FRACTION,
};
use newsrank_core::serve::{run_service, ServiceConfig};
use newsrank_core::synth::{generate_corpus, inject_anomalies, AnomalySpec, CascadeParams};
use newsrank_core::timeseries::{build_series, lifespan_histogram, Horizon};
use newsrank_core::Store;

#[derive(Parser)]
#[command(name = "newsrank", version, about = "Forecast and rank news articles by Twitter mentions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic article/tweet/matching corpus.
    Synth(SynthArgs),
    /// Clean raw JSONL records into a store.
    Ingest(IngestArgs),
    /// Print an article's cumulative series or the lifespan histogram.
    Series(SeriesArgs),
    /// Train a forecasting model on the training part of a store.
    Train(TrainArgs),
    /// Bootstrap evaluation on the validation part of a store.
    Evaluate(EvaluateArgs),
    /// Score recent articles periodically and serve the ranking over HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 4.0)]
    tau: f64,
    /// Mean expected mentions per article.
    #[arg(long, default_value_t = 40.0)]
    amplitude: f64,
    /// Publication times are spread over this many days.
    #[arg(long, default_value_t = 30.0)]
    span_days: f64,
    /// RFC 3339 start of the publication period (default 2018-12-01).
    #[arg(long)]
    start: Option<DateTime<Utc>>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    query_duplicates: usize,
    #[arg(long, default_value_t = 0)]
    duplicate_tweets: usize,
    #[arg(long, default_value_t = 0)]
    far_future: usize,
    #[arg(long, default_value_t = 0)]
    ancient: usize,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    articles: PathBuf,
    #[arg(long)]
    tweets: PathBuf,
    #[arg(long)]
    matchings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// RFC 3339 start of the accepted publication window.
    #[arg(long, requires = "window_end")]
    window_start: Option<DateTime<Utc>>,
    #[arg(long, requires = "window_start")]
    window_end: Option<DateTime<Utc>>,
    /// End of the observation period (default: latest tweet).
    #[arg(long)]
    observed_until: Option<DateTime<Utc>>,
}

#[derive(Args)]
struct SeriesArgs {
    #[arg(long)]
    store: PathBuf,
    /// Canonical URL of the article; omit for the lifespan histogram.
    #[arg(long)]
    url: Option<String>,
    #[arg(long, default_value_t = 24)]
    hours: i64,
    /// Minimum mentions for an article to enter the histogram.
    #[arg(long, default_value_t = 100)]
    min_mentions: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Baseline,
    LinearAr,
    Rf,
    S2s,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: Kind,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 500)]
    n_estimators: usize,
    /// Hidden units of the sequence-to-sequence model.
    #[arg(long, default_value_t = 200)]
    hidden: usize,
    /// Epochs in each of the three learning-rate phases.
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Keyword map and publisher count (JSON); built-in list by default.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Train on every mature article instead of the stratified subset.
    #[arg(long)]
    no_balance: bool,
    #[arg(long, default_value_t = DEFAULT_VALIDATION_FRACTION)]
    validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model file; repeat to compare several.
    #[arg(long, required = true)]
    model: Vec<PathBuf>,
    #[arg(long)]
    store: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
    start_times: Vec<u32>,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    bootstrap: usize,
    #[arg(long, default_value_t = 2000)]
    size: usize,
    #[arg(long, default_value_t = DEFAULT_VALIDATION_FRACTION)]
    validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Seconds between scoring passes.
    #[arg(long, default_value_t = 600)]
    cadence: u64,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Synth(a) => synth(a),
        Command::Ingest(a) => ingest(a),
        Command::Series(a) => series(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Serve(a) => serve(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let defaults = CascadeParams::default();
    let params = CascadeParams {
        tau_hours: a.tau,
        amplitude: a.amplitude,
        span_hours: a.span_days * 24.0,
        start: a.start.unwrap_or(defaults.start),
        seed: a.seed,
        ..defaults
    };
    let mut corpus = generate_corpus(a.n, &params)?;
    let spec = AnomalySpec {
        query_duplicates: a.query_duplicates,
        duplicate_tweets: a.duplicate_tweets,
        far_future: a.far_future,
        ancient: a.ancient,
        seed: a.seed,
    };
    let ledger = inject_anomalies(&mut corpus, &spec)?;
    corpus.write_to_dir(&a.out)?;
    if !spec.is_empty() {
        let path = a.out.join("anomalies.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&ledger)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    log::info!(
        "wrote {} articles, {} tweets, {} matching records to {}",
        corpus.articles.len(),
        corpus.tweets.len(),
        corpus.matchings.len(),
        a.out.display()
    );
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let window = match (a.window_start, a.window_end) {
        (Some(s), Some(e)) => Some(PublicationWindow::new(s, e)?),
        _ => None,
    };
    let options = IngestOptions {
        window,
        observed_until: a.observed_until,
    };
    let store = ingest_files(&a.articles, &a.tweets, &a.matchings, &options)?;
    store.save(&a.out)?;
    println!("{}", serde_json::to_string_pretty(&store.meta.stats)?);
    Ok(())
}

fn series(a: SeriesArgs) -> Result<()> {
    let store = Store::load(&a.store)?;
    match a.url {
        Some(url) => {
            let Some(m) = store.matchings.iter().find(|m| m.article.canonical_url == url) else {
                bail!("no article with canonical URL {url}");
            };
            let t1 = (m.t0() + chrono::Duration::hours(a.hours)).min(store.meta.observed_until);
            let s = build_series(m, t1, 3600)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        None => {
            let hist = lifespan_histogram(&store.matchings, a.min_mentions);
            println!("{}", serde_json::to_string_pretty(&hist)?);
        }
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let store = Store::load(&a.store)?;
    let (training, _) = store.split(a.validation_fraction)?;
    let spec = match a.model {
        Kind::Baseline => ModelSpec::Baseline { window: a.order },
        Kind::LinearAr => ModelSpec::LinearAr { order: a.order },
        Kind::Rf => ModelSpec::Rf {
            order: a.order,
            options: ForestOptions::new(a.n_estimators, a.seed),
        },
        Kind::S2s => ModelSpec::S2s {
            config: Seq2SeqConfig::with_hidden(a.hidden),
            schedule: TrainSchedule::scaled(a.epochs),
            seed: a.seed,
        },
    };
    let mut options = TrainOptions::new(spec, a.seed);
    options.balance = !a.no_balance;
    if let Some(path) = &a.features {
        options.features = FeatureConfig::from_path(path)?;
    }
    let file = train_model(training, store.meta.observed_until, &options)?;
    file.save(&a.out)?;
    log::info!("saved {} to {}", model_name(&file.model), a.out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let store = Store::load(&a.store)?;
    let files: Vec<ModelFile> = a
        .model
        .iter()
        .map(ModelFile::load)
        .collect::<newsrank_core::Result<_>>()?;
    let named: Vec<(String, &ModelFile)> = files.iter().map(|f| (model_name(&f.model), f)).collect();
    let config = EvalConfig {
        start_hours: a.start_times,
        horizon: Horizon::default(),
        k_top: a.k,
        n_bootstrap: a.bootstrap,
        bootstrap_size: a.size,
        seed: a.seed,
    };
    let report = evaluate_store(&store, a.validation_fraction, &named, &config)?;
    std::fs::write(&a.out, report.to_json()?).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    if a.cadence == 0 {
        bail!("cadence must be positive");
    }
    let mut config = ServiceConfig::new(a.store, a.model, a.bind);
    config.cadence = Duration::from_secs(a.cadence);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(run_service(config))?;
    Ok(())
}

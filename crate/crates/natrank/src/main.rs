use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand};
use log::debug;
use natrank::client::{ClientConfig, OracleError, OracleSpec};
use natrank::pipeline::{self, Method, RunConfig};
use natrank_core::aggregate::Aggregator;
use natrank_core::metrics::Metric;
use natrank_core::ngram::{NGramConfig, TokenizerId};
use natrank_core::ranking::SortOrder;

/// Rank suspicious lines of buggy Java code by naturalness.
#[derive(Debug, Parser)]
#[command(name = "natrank", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// A bundle directory, or a directory of bundle directories.
    #[arg(long, global = true)]
    bundle: Option<PathBuf>,
    /// Output directory; per-bundle artifacts go to OUT/<bundle_id>/.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// `stub`, `cmd:COMMAND` (stdio) or `http:HOST:PORT/PATH`.
    #[arg(long, global = true, default_value = "stub")]
    oracle: String,
    /// Propositions per masked token (1..=5).
    #[arg(long, global = true, default_value_t = 1)]
    k: usize,
    /// Restrict subject lines to business logic.
    #[arg(long, global = true, default_value_t = true, action = ArgAction::Set)]
    business_only: bool,
    /// Metrics to rank by (comma separated: conf,cos,acc).
    #[arg(long, global = true, value_delimiter = ',')]
    metric: Vec<String>,
    /// Aggregators (comma separated: min,max,mean,median,entropy).
    #[arg(long, global = true, value_delimiter = ',')]
    agg: Vec<String>,
    /// Sort orders (comma separated: asc,desc).
    #[arg(long, global = true, value_delimiter = ',')]
    order: Vec<String>,
    /// Rank with every supported metric, aggregator and order.
    #[arg(long, global = true)]
    grid: bool,
    /// N-gram tokenizers (comma separated: jp,utf8).
    #[arg(long, global = true, value_delimiter = ',')]
    tokenizer: Vec<String>,
    #[arg(long, global = true, default_value_t = 4)]
    ngram_order: usize,
    /// Training tokens seen at most this often become <UNK>.
    #[arg(long, global = true, default_value_t = 1)]
    unk_threshold: u64,
    /// Worker threads, and oracle requests kept in flight.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed for randomized components; every current stage is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Context tokens kept around each mask.
    #[arg(long, global = true, default_value_t = natrank_core::masking::DEFAULT_BUDGET)]
    budget: usize,
    /// Request window embeddings (needed by the cos metric).
    #[arg(long, global = true, default_value_t = true, action = ArgAction::Set)]
    embeddings: bool,
    /// Seconds to wait for an oracle reply before retrying.
    #[arg(long, global = true, default_value_t = 60)]
    timeout: u64,
    /// Extra attempts per oracle request after a transport failure.
    #[arg(long, global = true, default_value_t = 2)]
    retries: usize,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write masks.jsonl: one variant per maskable token of the subject lines.
    Mask,
    /// Query the oracle for every mask and write scores.jsonl.
    Score,
    /// Aggregate scores per line, rank and write line_scores.csv, outcomes.csv.
    Rank,
    /// Train n-gram models on unchanged files and write entropy.csv.
    Ngram,
    /// Join outcomes and compare methods pairwise into stats.csv.
    Eval,
    /// Write quartile and spread summaries.
    Report,
}

fn parse_list<T>(items: &[String], what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    items
        .iter()
        .map(|s| parse(s.trim()).with_context(|| format!("unknown {what} {s:?}")))
        .collect()
}

fn or_all<T: Clone>(v: Vec<T>, all: &[T]) -> Vec<T> {
    if v.is_empty() {
        all.to_vec()
    } else {
        v
    }
}

fn methods(cli: &Cli) -> Result<Vec<Method>> {
    if cli.grid {
        return Ok(Method::grid());
    }
    if cli.metric.is_empty() && cli.agg.is_empty() && cli.order.is_empty() {
        return Ok(Method::DEFAULTS.to_vec());
    }
    let metrics = or_all(parse_list(&cli.metric, "metric", Metric::parse)?, &Metric::ALL);
    let aggs = or_all(parse_list(&cli.agg, "aggregator", Aggregator::parse)?, &Aggregator::ALL);
    let orders = or_all(parse_list(&cli.order, "order", SortOrder::parse)?, &[SortOrder::Asc, SortOrder::Desc]);
    for &m in &metrics {
        for &a in &aggs {
            if !a.supports(m) && cli.metric.len() == 1 && cli.agg.len() == 1 {
                bail!("{} cannot be aggregated with {}", m.name(), a.name());
            }
        }
    }
    Ok(Method::product(&metrics, &aggs, &orders))
}

fn config(cli: &Cli) -> Result<RunConfig> {
    natrank_core::oracle::check_k(cli.k)?;
    let oracle: OracleSpec = cli.oracle.parse().map_err(anyhow::Error::msg)?;
    let mut tokenizers = parse_list(&cli.tokenizer, "tokenizer", TokenizerId::parse)?;
    if tokenizers.is_empty() {
        tokenizers = vec![TokenizerId::Jp, TokenizerId::Utf8];
    }
    if cli.ngram_order == 0 {
        bail!("--ngram-order must be at least 1");
    }
    if cli.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    debug!("seed {}", cli.seed);
    Ok(RunConfig {
        out: cli.out.clone(),
        oracle,
        client: ClientConfig {
            in_flight: cli.jobs,
            timeout: Duration::from_secs(cli.timeout),
            retries: cli.retries,
        },
        k: cli.k,
        business_only: cli.business_only,
        budget: cli.budget,
        embeddings: cli.embeddings,
        methods: methods(cli)?,
        tokenizers,
        ngram: NGramConfig {
            order: cli.ngram_order,
            unk_threshold: cli.unk_threshold,
            ..NGramConfig::default()
        },
        jobs: cli.jobs,
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    let bundles = || -> Result<_> {
        let dir = cli.bundle.as_ref().context("--bundle is required")?;
        pipeline::load_bundles(dir)
    };
    match cli.cmd {
        Cmd::Mask => pipeline::cmd_mask(&bundles()?, &cfg),
        Cmd::Score => pipeline::cmd_score(&bundles()?, &cfg),
        Cmd::Rank => pipeline::cmd_rank(&bundles()?, &cfg),
        Cmd::Ngram => pipeline::cmd_ngram(&bundles()?, &cfg),
        Cmd::Eval => pipeline::cmd_eval(&cfg.out),
        Cmd::Report => pipeline::cmd_report(&cfg.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<OracleError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

//! Row types of the emitted artifacts and their JSONL / CSV readers and writers.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const MASKS: &str = "masks.jsonl";
pub const SCORES: &str = "scores.jsonl";
pub const LINE_SCORES: &str = "line_scores.csv";
pub const OUTCOMES: &str = "outcomes.csv";
pub const NGRAM_OUTCOMES: &str = "ngram_outcomes.csv";
pub const ENTROPY: &str = "entropy.csv";
pub const STATS: &str = "stats.csv";
pub const REPORT: &str = "report.csv";
pub const SPREAD: &str = "sd.csv";

/// One masked variant (`masks.jsonl`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub bundle_id: String,
    pub file: String,
    pub line: usize,
    pub token_index: usize,
    pub original: String,
    pub window: Vec<String>,
}

/// Per-token scores (`scores.jsonl`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub file: String,
    pub line: usize,
    pub token_index: usize,
    pub conf: f64,
    pub cos: Option<f64>,
    pub acc: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineScoreRow {
    pub file: String,
    pub line: usize,
    pub metric: String,
    pub aggregator: String,
    pub value: f64,
    pub n_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub file: String,
    pub line: usize,
    pub tokenizer: String,
    #[serde(rename = "H")]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub bundle_id: String,
    pub method_id: String,
    pub first_hit: Option<f64>,
    pub mean_rank: Option<f64>,
    pub total_lines: usize,
    pub buggy_lines: usize,
    pub evaluable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub comparison: String,
    pub outcome_kind: String,
    pub a12: f64,
    #[serde(rename = "wilcoxon_W")]
    pub wilcoxon_w: f64,
    pub wilcoxon_p: f64,
    pub n_bugs: usize,
}

/// Box-plot summary of one method's outcomes across bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method_id: String,
    pub outcome_kind: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Spread of one method's line values within one bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow {
    pub bundle_id: String,
    pub metric: String,
    pub aggregator: String,
    pub n_lines: usize,
    pub sd: Option<f64>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("missing artifact {}", path.display()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{}:{}: malformed record", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

/// Writes `rows` with a header; the header is written even for no rows.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.with_context(|| format!("{}: row {}", path.display(), i + 2)))
        .collect()
}

pub const LINE_SCORES_HEADER: &[&str] = &["file", "line", "metric", "aggregator", "value", "n_tokens"];
pub const ENTROPY_HEADER: &[&str] = &["file", "line", "tokenizer", "H"];
pub const OUTCOMES_HEADER: &[&str] = &[
    "bundle_id",
    "method_id",
    "first_hit",
    "mean_rank",
    "total_lines",
    "buggy_lines",
    "evaluable",
];
pub const STATS_HEADER: &[&str] = &[
    "comparison",
    "outcome_kind",
    "a12",
    "wilcoxon_W",
    "wilcoxon_p",
    "n_bugs",
];
pub const REPORT_HEADER: &[&str] = &[
    "method_id",
    "outcome_kind",
    "n",
    "min",
    "q1",
    "median",
    "q3",
    "max",
    "mean",
];
pub const SPREAD_HEADER: &[&str] = &["bundle_id", "metric", "aggregator", "n_lines", "sd"];

//! The stages behind the CLI subcommands. Every stage reads and writes the
//! per-bundle artifacts under `OUT/<bundle_id>/`; `eval` and `report` work on
//! the whole output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use natrank_core::aggregate::{line_scores, Aggregator};
use natrank_core::corpus::{BugBundle, LineRecord};
use natrank_core::lexing::{lex_grammar_lenient, TokenKind};
use natrank_core::masking::{extract_sites, MaskSite, MaskedVariant, WindowSource, DEFAULT_BUDGET, DEFAULT_MASKABLE, PLACEHOLDER};
use natrank_core::metrics::{token_scores, Metric, TokenScore};
use natrank_core::ngram::{NGramConfig, NGramModel, TokenizerId};
use natrank_core::oracle::{StubVocab, VariantRef};
use natrank_core::ranking::{bug_outcome, complexity_baseline, random_baseline, rank_lines, LineRef, Outcome, SortOrder};
use natrank_core::stats::{a12, population_sd, quartiles, wilcoxon_signed_rank, PairedSample};
use rayon::prelude::*;

use crate::bundle::{discover, load_bundle};
use crate::client::{ClientConfig, HttpOracle, Oracle, OracleSpec, ProcessOracle, StubOracle};
use crate::formats::*;

pub const RANDOM: &str = "random";
pub const COMPLEXITY: &str = "complexity";

/// One ranking method: a metric, how its token scores become a line value,
/// and which end of the ranking is suspicious.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Method {
    pub metric: Metric,
    pub aggregator: Aggregator,
    pub order: SortOrder,
}

impl Method {
    pub const fn new(metric: Metric, aggregator: Aggregator, order: SortOrder) -> Self {
        Method {
            metric,
            aggregator,
            order,
        }
    }

    pub fn id(&self) -> String {
        format!("{}_{}_{}", self.metric.name(), self.aggregator.name(), self.order.name())
    }

    /// Low minimum confidence, high maximum cosine, low mean accuracy.
    pub const DEFAULTS: [Method; 3] = [
        Method::new(Metric::Conf, Aggregator::Min, SortOrder::Asc),
        Method::new(Metric::Cos, Aggregator::Max, SortOrder::Desc),
        Method::new(Metric::Acc, Aggregator::Mean, SortOrder::Asc),
    ];

    /// Every supported metric/aggregator pair in both orders.
    pub fn grid() -> Vec<Method> {
        Self::product(&Metric::ALL, &Aggregator::ALL, &[SortOrder::Asc, SortOrder::Desc])
    }

    pub fn product(metrics: &[Metric], aggs: &[Aggregator], orders: &[SortOrder]) -> Vec<Method> {
        let mut out = Vec::new();
        for &m in metrics {
            for &a in aggs {
                if !a.supports(m) {
                    continue;
                }
                for &o in orders {
                    out.push(Method::new(m, a, o));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub out: PathBuf,
    pub oracle: OracleSpec,
    pub client: ClientConfig,
    pub k: usize,
    pub business_only: bool,
    pub budget: usize,
    pub embeddings: bool,
    pub methods: Vec<Method>,
    pub tokenizers: Vec<TokenizerId>,
    pub ngram: NGramConfig,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out: PathBuf::from("out"),
            oracle: OracleSpec::Stub,
            client: ClientConfig::default(),
            k: 1,
            business_only: true,
            budget: DEFAULT_BUDGET,
            embeddings: true,
            methods: Method::DEFAULTS.to_vec(),
            tokenizers: vec![TokenizerId::Jp, TokenizerId::Utf8],
            ngram: NGramConfig::default(),
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn bundle_dir(&self, bundle_id: &str) -> PathBuf {
        self.out.join(bundle_id)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .context("building worker pool")
    }
}

/// Loads every bundle under `dir`, sorted by root path.
pub fn load_bundles(dir: &Path) -> Result<Vec<BugBundle>> {
    let roots = discover(dir)?;
    let bundles = roots
        .iter()
        .map(|r| load_bundle(r).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = BTreeSet::new();
    for b in &bundles {
        if !seen.insert(b.bundle_id.as_str()) {
            bail!("duplicate bundle id {}", b.bundle_id);
        }
    }
    Ok(bundles)
}

/// Runs `f` on every bundle on the worker pool; results keep bundle order.
fn each_bundle<T: Send>(cfg: &RunConfig, bundles: &[BugBundle], f: impl Fn(&BugBundle) -> Result<T> + Sync) -> Result<Vec<T>> {
    cfg.pool()?.install(|| bundles.par_iter().map(|b| f(b).with_context(|| format!("bundle {}", b.bundle_id))).collect())
}

// ---------------------------------------------------------------- mask

/// Subject lines of the bundle, keyed by file.
fn subject_by_file(bundle: &BugBundle, business_only: bool) -> BTreeMap<String, Vec<LineRecord>> {
    let mut out: BTreeMap<String, Vec<LineRecord>> = BTreeMap::new();
    for l in bundle.subject_lines(business_only) {
        out.entry(l.file.clone()).or_default().push(l);
    }
    out
}

/// One masked variant per maskable token on the bundle's subject lines.
pub fn mask_bundle(bundle: &BugBundle, cfg: &RunConfig) -> Result<Vec<MaskRecord>> {
    let mut out = Vec::new();
    for (path, lines) in subject_by_file(bundle, cfg.business_only) {
        let file = bundle.file(&path).expect("subject files exist");
        let seq = lex_grammar_lenient(&file.content).with_source(path.clone());
        let wanted: BTreeSet<usize> = lines.iter().map(|l| l.line_no).collect();
        let windows = WindowSource::new(&seq);
        for site in extract_sites(&seq, &wanted, DEFAULT_MASKABLE) {
            let v = windows.render(&site, cfg.budget)?;
            out.push(MaskRecord {
                bundle_id: bundle.bundle_id.clone(),
                file: site.file,
                line: site.line_no,
                token_index: site.token_index,
                original: site.original_text,
                window: v.window,
            });
        }
    }
    if out.is_empty() {
        warn!("bundle {}: no mask sites on the subject lines", bundle.bundle_id);
    }
    Ok(out)
}

pub fn cmd_mask(bundles: &[BugBundle], cfg: &RunConfig) -> Result<()> {
    each_bundle(cfg, bundles, |b| {
        let masks = mask_bundle(b, cfg)?;
        info!("bundle {}: {} mask sites", b.bundle_id, masks.len());
        write_jsonl(&cfg.bundle_dir(&b.bundle_id).join(MASKS), &masks)
    })?;
    Ok(())
}

// ---------------------------------------------------------------- score

fn kind_of(text: &str) -> TokenKind {
    lex_grammar_lenient(text)
        .significant()
        .next()
        .map_or(TokenKind::Identifier, |(_, t)| t.kind)
}

/// Rebuilds the masked variants recorded in `masks.jsonl`.
pub fn variants_from_masks(masks: &[MaskRecord]) -> Result<Vec<MaskedVariant>> {
    masks
        .iter()
        .map(|m| {
            let mut marks = m.window.iter().enumerate().filter(|(_, t)| *t == PLACEHOLDER);
            let (Some((pos, _)), None) = (marks.next(), marks.next()) else {
                bail!("{}:{}#{}: window must hold exactly one {PLACEHOLDER}", m.file, m.line, m.token_index);
            };
            Ok(MaskedVariant {
                site: MaskSite {
                    file: m.file.clone(),
                    line_no: m.line,
                    token_index: m.token_index,
                    original_text: m.original.clone(),
                    kind: kind_of(&m.original),
                },
                window: m.window.clone(),
                mask_pos: pos,
                window_budget: m.window.len(),
            })
        })
        .collect()
}

/// Stub vocabulary of a bundle: its unchanged files, or all files when it
/// has none.
pub fn stub_vocab(bundle: &BugBundle) -> Result<StubVocab> {
    let sources: Vec<&str> = if bundle.no_train() {
        bundle.files().iter().map(|f| f.content.as_str()).collect()
    } else {
        bundle.training_files().map(|f| f.content.as_str()).collect()
    };
    Ok(StubVocab::from_sources(sources)?)
}

pub fn score_records(masks: &[MaskRecord], oracle: &mut dyn Oracle, k: usize, embeddings: bool) -> Result<Vec<ScoreRecord>> {
    let variants = variants_from_masks(masks)?;
    let records = oracle.query(&variants, k, embeddings)?;
    let sites: Vec<MaskSite> = variants.into_iter().map(|v| v.site).collect();
    Ok(token_scores(&records, &sites, k)?
        .into_iter()
        .map(|t| ScoreRecord {
            file: t.variant_ref.file,
            line: t.variant_ref.line,
            token_index: t.variant_ref.token_index,
            conf: t.conf,
            cos: t.cos,
            acc: t.acc,
            k: t.k_used,
        })
        .collect())
}

fn read_masks(cfg: &RunConfig, bundle: &BugBundle) -> Result<Vec<MaskRecord>> {
    let masks: Vec<MaskRecord> = read_jsonl(&cfg.bundle_dir(&bundle.bundle_id).join(MASKS))?;
    if let Some(m) = masks.iter().find(|m| m.bundle_id != bundle.bundle_id) {
        bail!("masks of bundle {} found under {}", m.bundle_id, bundle.bundle_id);
    }
    Ok(masks)
}

pub fn cmd_score(bundles: &[BugBundle], cfg: &RunConfig) -> Result<()> {
    natrank_core::oracle::check_k(cfg.k)?;
    let write = |b: &BugBundle, scores: Vec<ScoreRecord>| {
        info!("bundle {}: {} token scores", b.bundle_id, scores.len());
        write_jsonl(&cfg.bundle_dir(&b.bundle_id).join(SCORES), &scores)
    };
    match &cfg.oracle {
        OracleSpec::Stub => {
            each_bundle(cfg, bundles, |b| {
                let masks = read_masks(cfg, b)?;
                let mut oracle = StubOracle { vocab: stub_vocab(b)? };
                write(b, score_records(&masks, &mut oracle, cfg.k, cfg.embeddings)?)
            })?;
        }
        external => {
            // One endpoint shared by all bundles; concurrency comes from
            // requests in flight.
            let mut oracle: Box<dyn Oracle> = match external {
                OracleSpec::Command(cmd) => Box::new(ProcessOracle::new(cmd.clone(), cfg.client)),
                OracleSpec::Http(url) => Box::new(HttpOracle::new(url.clone(), cfg.client)),
                OracleSpec::Stub => unreachable!(),
            };
            for b in bundles {
                let masks = read_masks(cfg, b)?;
                let scores = score_records(&masks, oracle.as_mut(), cfg.k, cfg.embeddings)
                    .with_context(|| format!("bundle {}", b.bundle_id))?;
                write(b, scores)?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- rank

fn outcome_row(bundle: &BugBundle, method_id: &str, total: usize, buggy: usize, o: Option<Outcome>) -> OutcomeRow {
    OutcomeRow {
        bundle_id: bundle.bundle_id.clone(),
        method_id: method_id.to_string(),
        first_hit: o.map(|o| o.first_hit),
        mean_rank: o.map(|o| o.mean_rank),
        total_lines: total,
        buggy_lines: buggy,
        evaluable: o.is_some(),
    }
}

/// Subject line references, their buggy subset and the complexity values.
struct Subject {
    lines: Vec<LineRecord>,
    refs: BTreeSet<LineRef>,
    buggy: BTreeSet<LineRef>,
}

impl Subject {
    fn of(bundle: &BugBundle, business_only: bool) -> Self {
        let lines = bundle.subject_lines(business_only);
        let refs = lines.iter().map(|l| LineRef::new(l.file.clone(), l.line_no)).collect();
        let buggy = lines
            .iter()
            .filter(|l| l.is_buggy())
            .map(|l| LineRef::new(l.file.clone(), l.line_no))
            .collect();
        Subject { lines, refs, buggy }
    }

    /// Outcome of ranking `values`, a value per scored subject line.
    fn outcome(&self, values: &BTreeMap<LineRef, f64>, order: SortOrder) -> Option<Outcome> {
        let all: BTreeMap<LineRef, Option<f64>> = self.refs.iter().map(|r| (r.clone(), values.get(r).copied())).collect();
        bug_outcome(&rank_lines(&all, order), &self.buggy)
    }

    fn baseline_rows(&self, bundle: &BugBundle) -> Vec<OutcomeRow> {
        let (t, b) = (self.refs.len(), self.buggy.len());
        let complexity = bug_outcome(&rank_lines(&complexity_baseline(&self.lines), SortOrder::Desc), &self.buggy);
        vec![
            outcome_row(bundle, RANDOM, t, b, random_baseline(t, b)),
            outcome_row(bundle, COMPLEXITY, t, b, complexity),
        ]
    }
}

fn token_scores_of(scores: &[ScoreRecord]) -> Vec<TokenScore> {
    scores
        .iter()
        .map(|s| TokenScore {
            variant_ref: VariantRef {
                file: s.file.clone(),
                line: s.line,
                token_index: s.token_index,
            },
            conf: s.conf,
            cos: s.cos,
            acc: s.acc,
            k_used: s.k,
        })
        .collect()
}

/// Line values of every requested metric/aggregator pair and the outcome of
/// every method plus the two baselines.
pub fn rank_bundle(bundle: &BugBundle, scores: &[ScoreRecord], cfg: &RunConfig) -> Result<(Vec<LineScoreRow>, Vec<OutcomeRow>)> {
    let subject = Subject::of(bundle, cfg.business_only);
    let tokens = token_scores_of(scores);
    let (t, b) = (subject.refs.len(), subject.buggy.len());
    let pairs: BTreeSet<(Metric, Aggregator)> = cfg.methods.iter().map(|m| (m.metric, m.aggregator)).collect();
    let mut values: BTreeMap<(Metric, Aggregator), BTreeMap<LineRef, f64>> = BTreeMap::new();
    let mut rows = Vec::new();
    for &(metric, agg) in &pairs {
        let ls = line_scores(&tokens, metric, agg).map_err(|e| anyhow!("{} {}: {e}", metric.name(), agg.name()))?;
        let mut map = BTreeMap::new();
        for l in ls {
            let r = LineRef::new(l.file.clone(), l.line_no);
            if !subject.refs.contains(&r) {
                bail!("scored line {}:{} is not a subject line; rerun mask with the same --business-only", l.file, l.line_no);
            }
            rows.push(LineScoreRow {
                file: l.file,
                line: l.line_no,
                metric: metric.name().into(),
                aggregator: agg.name().into(),
                value: l.value,
                n_tokens: l.n_tokens,
            });
            map.insert(r, l.value);
        }
        values.insert((metric, agg), map);
    }
    let mut outcomes: Vec<OutcomeRow> = cfg
        .methods
        .iter()
        .map(|m| {
            let o = subject.outcome(&values[&(m.metric, m.aggregator)], m.order);
            outcome_row(bundle, &m.id(), t, b, o)
        })
        .collect();
    outcomes.extend(subject.baseline_rows(bundle));
    if b == 0 {
        warn!("bundle {}: no buggy line among the subject lines", bundle.bundle_id);
    }
    Ok((rows, outcomes))
}

pub fn cmd_rank(bundles: &[BugBundle], cfg: &RunConfig) -> Result<()> {
    each_bundle(cfg, bundles, |b| {
        let dir = cfg.bundle_dir(&b.bundle_id);
        let scores: Vec<ScoreRecord> = read_jsonl(&dir.join(SCORES))?;
        let (rows, outcomes) = rank_bundle(b, &scores, cfg)?;
        write_csv(&dir.join(LINE_SCORES), LINE_SCORES_HEADER, &rows)?;
        write_csv(&dir.join(OUTCOMES), OUTCOMES_HEADER, &outcomes)
    })?;
    Ok(())
}

// ---------------------------------------------------------------- ngram

pub fn ngram_method_id(tok: TokenizerId) -> String {
    format!("ngram_{}_{}", tok.name(), SortOrder::Desc.name())
}

/// Models per tokenizer, entropy rows, outcome rows.
pub type NgramRun = (Vec<(TokenizerId, NGramModel)>, Vec<EntropyRow>, Vec<OutcomeRow>);

/// Per-tokenizer models trained on the unchanged files, the cross-entropy
/// of every subject line and the outcome of ranking by it (highest first).
/// `None` for bundles without unchanged files.
pub fn ngram_bundle(bundle: &BugBundle, cfg: &RunConfig) -> Result<Option<NgramRun>> {
    if bundle.no_train() {
        return Ok(None);
    }
    let subject = Subject::of(bundle, cfg.business_only);
    let sources: Vec<&str> = bundle.training_files().map(|f| f.content.as_str()).collect();
    let mut models = Vec::new();
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for &tok in &cfg.tokenizers {
        let model = NGramModel::train_sources(&sources, cfg.ngram.with_tokenizer(tok))?;
        let mut values = BTreeMap::new();
        for file in bundle.subject_files() {
            let h = model.score_source(&file.content);
            for (i, hv) in h.into_iter().enumerate() {
                let r = LineRef::new(file.path.clone(), i + 1);
                if !subject.refs.contains(&r) {
                    continue;
                }
                rows.push(EntropyRow {
                    file: file.path.clone(),
                    line: i + 1,
                    tokenizer: tok.name().into(),
                    h: hv,
                });
                if let Some(v) = hv {
                    values.insert(r, v);
                }
            }
        }
        let o = subject.outcome(&values, SortOrder::Desc);
        outcomes.push(outcome_row(bundle, &ngram_method_id(tok), subject.refs.len(), subject.buggy.len(), o));
        models.push((tok, model));
    }
    Ok(Some((models, rows, outcomes)))
}

pub fn cmd_ngram(bundles: &[BugBundle], cfg: &RunConfig) -> Result<()> {
    each_bundle(cfg, bundles, |b| {
        let dir = cfg.bundle_dir(&b.bundle_id);
        let Some((models, rows, outcomes)) = ngram_bundle(b, cfg)? else {
            info!("bundle {}: skipped, no unchanged file to train on", b.bundle_id);
            return Ok(());
        };
        for (tok, model) in &models {
            let path = dir.join(format!("ngram_{}.json", tok.name()));
            fs::create_dir_all(&dir)?;
            fs::write(&path, serde_json::to_vec(&model.to_data())?).with_context(|| format!("writing {}", path.display()))?;
        }
        write_csv(&dir.join(ENTROPY), ENTROPY_HEADER, &rows)?;
        write_csv(&dir.join(NGRAM_OUTCOMES), OUTCOMES_HEADER, &outcomes)
    })?;
    Ok(())
}

/// Loads a model written by `ngram`.
pub fn load_model(path: &Path) -> Result<NGramModel> {
    let bytes = fs::read(path).with_context(|| format!("missing artifact {}", path.display()))?;
    let data = serde_json::from_slice(&bytes).with_context(|| format!("malformed model {}", path.display()))?;
    Ok(NGramModel::from_data(data)?)
}

// ---------------------------------------------------------------- eval

/// Bundle directories of `out` holding outcomes, sorted by name.
fn outcome_dirs(out: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)
        .with_context(|| format!("missing output directory {}", out.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(OUTCOMES).is_file() || p.join(NGRAM_OUTCOMES).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no {} under {}; run rank first", OUTCOMES, out.display());
    }
    Ok(dirs)
}

/// Paired comparison of two methods over the bundles where both are evaluable.
pub fn compare(a: &str, b: &str, kind: &str, rows: &[OutcomeRow]) -> Option<StatsRow> {
    let pick = |r: &OutcomeRow| if kind == "first_hit" { r.first_hit } else { r.mean_rank };
    let mut by_bundle: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in rows {
        if r.method_id == a {
            by_bundle.entry(&r.bundle_id).or_default().0 = pick(r);
        } else if r.method_id == b {
            by_bundle.entry(&r.bundle_id).or_default().1 = pick(r);
        }
    }
    let pairs: Vec<(f64, f64)> = by_bundle
        .values()
        .filter_map(|&(x, y)| Some((x?, y?)))
        .collect();
    let sample = PairedSample::new(pairs, true).ok()?;
    let w = wilcoxon_signed_rank(&sample);
    Some(StatsRow {
        comparison: format!("{a} vs {b}"),
        outcome_kind: kind.into(),
        a12: a12(&sample),
        wilcoxon_w: w.w,
        wilcoxon_p: w.p,
        n_bugs: sample.len(),
    })
}

pub const OUTCOME_KINDS: [&str; 2] = ["first_hit", "mean_rank"];

/// Joins the per-bundle outcomes into `OUT/outcomes.csv` and compares every
/// pair of methods in `OUT/stats.csv`.
pub fn cmd_eval(out: &Path) -> Result<()> {
    let mut rows: Vec<OutcomeRow> = Vec::new();
    for dir in outcome_dirs(out)? {
        for name in [OUTCOMES, NGRAM_OUTCOMES] {
            let p = dir.join(name);
            if p.is_file() {
                rows.extend(read_csv::<OutcomeRow>(&p)?);
            }
        }
    }
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &rows {
        let t = *totals.entry(&r.bundle_id).or_insert(r.total_lines);
        if t != r.total_lines {
            bail!("bundle {}: methods ranked different line sets ({t} vs {} lines)", r.bundle_id, r.total_lines);
        }
    }
    let mut methods: Vec<&str> = Vec::new();
    for r in &rows {
        if !methods.contains(&r.method_id.as_str()) {
            methods.push(&r.method_id);
        }
    }
    let mut stats = Vec::new();
    for (i, a) in methods.iter().enumerate() {
        for b in &methods[i + 1..] {
            for kind in OUTCOME_KINDS {
                match compare(a, b, kind, &rows) {
                    Some(s) => stats.push(s),
                    None => warn!("{a} vs {b} ({kind}): no bundle evaluable by both"),
                }
            }
        }
    }
    write_csv(&out.join(OUTCOMES), OUTCOMES_HEADER, &rows)?;
    write_csv(&out.join(STATS), STATS_HEADER, &stats)?;
    info!("{} outcome rows, {} comparisons", rows.len(), stats.len());
    Ok(())
}

// ---------------------------------------------------------------- report

/// Quartiles of every method's outcomes (`OUT/report.csv`) and the spread of
/// line values within each bundle (`OUT/sd.csv`).
pub fn cmd_report(out: &Path) -> Result<()> {
    let rows: Vec<OutcomeRow> = read_csv(&out.join(OUTCOMES)).context("run eval first")?;
    let mut methods: Vec<&str> = Vec::new();
    for r in &rows {
        if !methods.contains(&r.method_id.as_str()) {
            methods.push(&r.method_id);
        }
    }
    let mut report = Vec::new();
    for m in methods {
        for kind in OUTCOME_KINDS {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.method_id == m)
                .filter_map(|r| if kind == "first_hit" { r.first_hit } else { r.mean_rank })
                .collect();
            if let Some(q) = quartiles(&vals) {
                report.push(ReportRow {
                    method_id: m.into(),
                    outcome_kind: kind.into(),
                    n: vals.len(),
                    min: q.min,
                    q1: q.q1,
                    median: q.median,
                    q3: q.q3,
                    max: q.max,
                    mean: q.mean,
                });
            }
        }
    }
    write_csv(&out.join(REPORT), REPORT_HEADER, &report)?;

    let mut spread = Vec::new();
    for dir in outcome_dirs(out)? {
        let p = dir.join(LINE_SCORES);
        if !p.is_file() {
            continue;
        }
        let bundle_id = dir.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for r in read_csv::<LineScoreRow>(&p)? {
            groups.entry((r.metric, r.aggregator)).or_default().push(r.value);
        }
        for ((metric, aggregator), vals) in groups {
            spread.push(SpreadRow {
                bundle_id: bundle_id.clone(),
                metric,
                aggregator,
                n_lines: vals.len(),
                sd: population_sd(&vals),
            });
        }
    }
    write_csv(&out.join(SPREAD), SPREAD_HEADER, &spread)
}

//! Order-n token language model with interpolated Kneser-Ney smoothing.
//!
//! Each line is an independent sequence padded with `n - 1` begin markers and
//! one end marker. The highest order uses raw counts; every lower order uses
//! continuation counts (the number of distinct tokens seen to the left of a
//! gram). The unigram level is interpolated with a uniform distribution over
//! the vocabulary so that every token, `<UNK>` included, keeps nonzero mass.
//!
//! ```text
//! P_j(t | ctx) = (max(c(ctx t) - D_j, 0) + D_j * N1+(ctx .) * P_{j-1}(t | ctx')) / c(ctx)
//! ```
//!
//! where `ctx'` drops the oldest token and a context never seen in training
//! defers entirely to the next lower order.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lexing;

pub const UNK: &str = "<UNK>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

/// Fallback discount when count-of-counts cannot give one in `[0, 1)`.
pub const FALLBACK_DISCOUNT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TokenizerId {
    /// Grammar-aware Java tokens; comments and empty lines are dropped.
    Jp,
    /// Whitespace-separated runs over the raw text, comments included.
    Utf8,
}

impl TokenizerId {
    pub fn name(self) -> &'static str {
        match self {
            TokenizerId::Jp => "jp",
            TokenizerId::Utf8 => "utf8",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "jp" => Some(TokenizerId::Jp),
            "utf8" => Some(TokenizerId::Utf8),
            _ => None,
        }
    }

    /// Tokens of every line of `source`; `result[i]` holds line `i + 1`.
    /// Multi-line tokens belong to the line they start on.
    pub fn tokenize_source(self, source: &str) -> Vec<Vec<String>> {
        let line_count = crate::lines::line_index(source).len();
        let seq = match self {
            TokenizerId::Jp => lexing::lex_grammar_lenient(source),
            TokenizerId::Utf8 => lexing::lex_raw(source),
        };
        seq.significant_by_line(line_count)
            .into_iter()
            .map(|toks| toks.into_iter().map(|t| t.text.clone()).collect())
            .collect()
    }

    /// Tokens of one line taken out of its file.
    pub fn tokenize_line(self, line: &str) -> Vec<String> {
        self.tokenize_source(line).into_iter().flatten().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DiscountMode {
    /// `D = n1 / (n1 + 2 n2)` per order.
    CountOfCounts,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UnkRule {
    /// Tokens seen at most `k` times become `<UNK>`.
    AtMost,
    /// Tokens seen fewer than `k` times become `<UNK>`.
    LessThan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NGramConfig {
    pub order: usize,
    pub unk_threshold: u64,
    pub unk_rule: UnkRule,
    pub tokenizer: TokenizerId,
    pub discount_mode: DiscountMode,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig {
            order: 4,
            unk_threshold: 1,
            unk_rule: UnkRule::AtMost,
            tokenizer: TokenizerId::Jp,
            discount_mode: DiscountMode::CountOfCounts,
        }
    }
}

impl NGramConfig {
    pub fn with_tokenizer(mut self, tokenizer: TokenizerId) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    fn is_rare(&self, count: u64) -> bool {
        match self.unk_rule {
            UnkRule::AtMost => count <= self.unk_threshold,
            UnkRule::LessThan => count < self.unk_threshold,
        }
    }

    fn check(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidArgument("n-gram order must be at least 1".into()));
        }
        if let DiscountMode::Fixed(d) = self.discount_mode {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "fixed discount must lie in [0, 1), got {d}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextStats {
    /// Sum of the order's counts over all following tokens.
    total: u64,
    /// Following tokens, with the order's count (raw or continuation).
    next: BTreeMap<u32, u64>,
}

/// Serializable form of a trained model: the configuration, the vocabulary
/// and the highest-order counts. Everything else is derived on load.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelData {
    pub config: NGramConfig,
    /// Token strings by id; ids 0, 1 and 2 are `<s>`, `</s>` and `<UNK>`.
    pub vocab: Vec<String>,
    pub ngrams: Vec<(Vec<u32>, u64)>,
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    config: NGramConfig,
    vocab: Vec<String>,
    ids: BTreeMap<String, u32>,
    top_counts: BTreeMap<Vec<u32>, u64>,
    /// `tables[j - 1]` is the order-`j` table keyed by its `j - 1` context.
    tables: Vec<BTreeMap<Vec<u32>, ContextStats>>,
    discounts: Vec<f64>,
}

impl NGramModel {
    /// Trains on lines tokenized one by one, out of file context.
    pub fn train<S: AsRef<str>>(lines: &[S], cfg: NGramConfig) -> Result<Self> {
        let seqs: Vec<Vec<String>> = lines
            .iter()
            .map(|l| cfg.tokenizer.tokenize_line(l.as_ref()))
            .collect();
        Self::train_tokens(seqs, cfg)
    }

    /// Trains on whole files, so multi-line comments are recognized.
    pub fn train_sources<S: AsRef<str>>(sources: &[S], cfg: NGramConfig) -> Result<Self> {
        let seqs: Vec<Vec<String>> = sources
            .iter()
            .flat_map(|s| cfg.tokenizer.tokenize_source(s.as_ref()))
            .collect();
        Self::train_tokens(seqs, cfg)
    }

    /// Trains on pre-tokenized lines; empty lines are skipped.
    pub fn train_tokens(lines: Vec<Vec<String>>, cfg: NGramConfig) -> Result<Self> {
        cfg.check()?;
        let lines: Vec<Vec<String>> = lines.into_iter().filter(|l| !l.is_empty()).collect();
        if lines.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut raw: BTreeMap<&str, u64> = BTreeMap::new();
        for t in lines.iter().flatten() {
            *raw.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut vocab: Vec<String> = vec![BOS.to_string(), EOS.to_string(), UNK.to_string()];
        vocab.extend(
            raw.iter()
                .filter(|(t, c)| !cfg.is_rare(**c) && ![BOS, EOS, UNK].contains(*t))
                .map(|(t, _)| t.to_string()),
        );
        let ids: BTreeMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        let n = cfg.order;
        let mut top_counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        for line in &lines {
            let mut seq = vec![BOS_ID; n - 1];
            seq.extend(line.iter().map(|t| match ids.get(t) {
                Some(&id) if id != BOS_ID => id,
                _ => UNK_ID,
            }));
            seq.push(EOS_ID);
            for end in n - 1..seq.len() {
                *top_counts.entry(seq[end + 1 - n..=end].to_vec()).or_insert(0) += 1;
            }
        }
        Ok(Self::build(cfg, vocab, ids, top_counts))
    }

    pub fn from_data(data: ModelData) -> Result<Self> {
        data.config.check()?;
        let n = data.config.order;
        let v = data.vocab.len() as u32;
        if data.vocab.len() < 3 || data.vocab[..3] != [BOS, EOS, UNK] {
            return Err(Error::InvalidArgument(
                "model vocabulary must start with <s>, </s>, <UNK>".into(),
            ));
        }
        let mut top_counts = BTreeMap::new();
        for (gram, c) in data.ngrams {
            if gram.len() != n || gram.iter().any(|&id| id >= v) || c == 0 {
                return Err(Error::InvalidArgument("malformed n-gram entry".into()));
            }
            *top_counts.entry(gram).or_insert(0) += c;
        }
        if top_counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let ids = data
            .vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Self::build(data.config, data.vocab, ids, top_counts))
    }

    pub fn to_data(&self) -> ModelData {
        ModelData {
            config: self.config,
            vocab: self.vocab.clone(),
            ngrams: self
                .top_counts
                .iter()
                .map(|(g, c)| (g.clone(), *c))
                .collect(),
        }
    }

    fn build(
        config: NGramConfig,
        vocab: Vec<String>,
        ids: BTreeMap<String, u32>,
        top_counts: BTreeMap<Vec<u32>, u64>,
    ) -> Self {
        let n = config.order;
        // Raw counts for every order: the j-suffix of each n-gram occurrence.
        let mut raw: Vec<BTreeMap<Vec<u32>, u64>> = vec![BTreeMap::new(); n];
        for (gram, &c) in &top_counts {
            for j in 1..=n {
                *raw[j - 1].entry(gram[n - j..].to_vec()).or_insert(0) += c;
            }
        }
        let mut tables = Vec::with_capacity(n);
        let mut discounts = Vec::with_capacity(n);
        for j in 1..=n {
            let counts: BTreeMap<Vec<u32>, u64> = if j == n {
                raw[j - 1].clone()
            } else {
                let mut cont: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
                for gram in raw[j].keys() {
                    *cont.entry(gram[1..].to_vec()).or_insert(0) += 1;
                }
                cont
            };
            discounts.push(match config.discount_mode {
                DiscountMode::Fixed(d) => d,
                DiscountMode::CountOfCounts => count_of_counts_discount(counts.values().copied()),
            });
            let mut table: BTreeMap<Vec<u32>, ContextStats> = BTreeMap::new();
            for (gram, c) in counts {
                let stats = table.entry(gram[..j - 1].to_vec()).or_default();
                stats.total += c;
                stats.next.insert(gram[j - 1], c);
            }
            tables.push(table);
        }
        NGramModel {
            config,
            vocab,
            ids,
            top_counts,
            tables,
            discounts,
        }
    }

    pub fn config(&self) -> &NGramConfig {
        &self.config
    }

    /// Discount of each order, lowest first.
    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    /// Predictable tokens: the vocabulary without the begin marker.
    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.vocab[1..].iter().map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.get(token).is_some_and(|&id| id != BOS_ID)
    }

    /// Raw count of a full-order n-gram given as strings (after UNK mapping).
    pub fn count(&self, gram: &[&str]) -> u64 {
        let ids: Vec<u32> = gram.iter().map(|t| self.context_id(t)).collect();
        self.top_counts.get(&ids).copied().unwrap_or(0)
    }

    /// Contexts observed at the highest order, as token strings.
    pub fn observed_contexts(&self) -> Vec<Vec<&str>> {
        self.tables[self.config.order - 1]
            .keys()
            .map(|ctx| ctx.iter().map(|&id| self.vocab[id as usize].as_str()).collect())
            .collect()
    }

    fn token_id(&self, t: &str) -> u32 {
        match self.ids.get(t) {
            Some(&id) if id != BOS_ID => id,
            _ => UNK_ID,
        }
    }

    fn context_id(&self, t: &str) -> u32 {
        self.ids.get(t).copied().unwrap_or(UNK_ID)
    }

    /// Smoothed probability of `t` after `context` (oldest first). Only the
    /// last `n - 1` context tokens are used; unknown tokens count as `<UNK>`.
    pub fn prob<S: AsRef<str>>(&self, context: &[S], t: &str) -> f64 {
        let keep = context.len().min(self.config.order - 1);
        let ctx: Vec<u32> = context[context.len() - keep..]
            .iter()
            .map(|s| self.context_id(s.as_ref()))
            .collect();
        self.prob_ids(&ctx, self.token_id(t))
    }

    fn prob_ids(&self, ctx: &[u32], t: u32) -> f64 {
        let j = ctx.len() + 1;
        if j == 1 {
            return self.unigram(t);
        }
        let lower = || self.prob_ids(&ctx[1..], t);
        match self.tables[j - 1].get(ctx) {
            Some(stats) if stats.total > 0 => {
                let d = self.discounts[j - 1];
                let c = stats.next.get(&t).copied().unwrap_or(0) as f64;
                let total = stats.total as f64;
                let types = stats.next.len() as f64;
                ((c - d).max(0.0) + d * types * lower()) / total
            }
            _ => lower(),
        }
    }

    fn unigram(&self, t: u32) -> f64 {
        let uniform = 1.0 / (self.vocab.len() - 1) as f64;
        match self.tables[0].get(&Vec::new()) {
            Some(stats) if stats.total > 0 => {
                let d = self.discounts[0];
                let c = stats.next.get(&t).copied().unwrap_or(0) as f64;
                ((c - d).max(0.0) + d * stats.next.len() as f64 * uniform) / stats.total as f64
            }
            _ => uniform,
        }
    }

    /// Per-token average negative log-probability of a token line, each token
    /// conditioned on up to `n - 1` predecessors with begin padding. `None`
    /// for an empty line.
    pub fn cross_entropy_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Option<f64> {
        if tokens.is_empty() {
            return None;
        }
        let n = self.config.order;
        let mut ctx: Vec<u32> = vec![BOS_ID; n - 1];
        let mut sum = 0.0;
        for t in tokens {
            let id = self.token_id(t.as_ref());
            sum += libm::log(self.prob_ids(&ctx[ctx.len() + 1 - n..], id));
            ctx.push(id);
        }
        Some(-sum / tokens.len() as f64)
    }

    /// Cross-entropy of one line tokenized with the model's tokenizer.
    pub fn cross_entropy(&self, line: &str) -> Option<f64> {
        self.cross_entropy_tokens(&self.config.tokenizer.tokenize_line(line))
    }

    /// Cross-entropy of every line of a source file, tokenized in context.
    pub fn score_source(&self, source: &str) -> Vec<Option<f64>> {
        self.config
            .tokenizer
            .tokenize_source(source)
            .iter()
            .map(|toks| self.cross_entropy_tokens(toks))
            .collect()
    }
}

/// `n1 / (n1 + 2 n2)` over the given counts, or [`FALLBACK_DISCOUNT`] when
/// the ratio is undefined or not below 1.
pub fn count_of_counts_discount(counts: impl Iterator<Item = u64>) -> f64 {
    let (mut n1, mut n2) = (0u64, 0u64);
    for c in counts {
        match c {
            1 => n1 += 1,
            2 => n2 += 1,
            _ => {}
        }
    }
    let denom = n1 + 2 * n2;
    if denom == 0 || n2 == 0 {
        return FALLBACK_DISCOUNT;
    }
    n1 as f64 / denom as f64
}

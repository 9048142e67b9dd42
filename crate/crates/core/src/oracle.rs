//! Fill-mask oracle records and the deterministic in-process stub oracle.
//!
//! The stub proposes, for a masked token, the most frequent vocabulary
//! entries of the same coarse class (identifier-like, operator-like or
//! literal-like). A proposition's confidence is its frequency within that
//! class; it is not renormalized over the returned `k`, so asking for more
//! propositions never changes the ones already returned. Embeddings are
//! 64-bucket hashed bags of tokens, L2-normalized.
//!
//! A vocabulary built from source files additionally records which tokens
//! occur between each pair of neighbours; the stub then answers from the
//! table of the mask's own neighbours when it has one, so masks in familiar
//! surroundings get confident propositions and masks next to unseen tokens
//! fall back to plain class frequencies.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lexing::{self, TokenKind};
use crate::masking::{MaskSite, MaskedVariant};

pub const MAX_K: usize = 5;

/// Dimension of the stub's hashed embeddings.
pub const STUB_DIM: usize = 64;

/// Identifies the masked variant a record answers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariantRef {
    pub file: String,
    pub line: usize,
    pub token_index: usize,
}

impl VariantRef {
    pub fn of(site: &MaskSite) -> Self {
        VariantRef {
            file: site.file.clone(),
            line: site.line_no,
            token_index: site.token_index,
        }
    }
}

impl core::fmt::Display for VariantRef {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}:{}#{}", self.file, self.line, self.token_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Proposition {
    pub token: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub variant_ref: VariantRef,
    /// Ranked by confidence, highest first.
    pub propositions: Vec<Proposition>,
    pub embedding_original: Option<Vec<f64>>,
    /// Embedding of the window with the rank-1 proposition substituted.
    pub embedding_predicted: Option<Vec<f64>>,
}

impl PredictionRecord {
    /// Checks the record invariants; the error text names the offending field.
    pub fn validate(&self) -> Result<()> {
        let n = self.propositions.len();
        if n == 0 || n > MAX_K {
            return Err(Error::InvalidArgument(format!(
                "{}: expected 1..={MAX_K} propositions, got {n}",
                self.variant_ref
            )));
        }
        for (i, p) in self.propositions.iter().enumerate() {
            if !(p.confidence > 0.0 && p.confidence <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{}: confidence {} outside (0,1]",
                    self.variant_ref, p.confidence
                )));
            }
            if i > 0 && p.confidence > self.propositions[i - 1].confidence {
                return Err(Error::InvalidArgument(format!(
                    "{}: confidences not sorted descending",
                    self.variant_ref
                )));
            }
        }
        match (&self.embedding_original, &self.embedding_predicted) {
            (Some(a), Some(b)) => {
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch(a.len(), b.len()));
                }
                if a.iter().chain(b).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "{}: non-finite embedding entry",
                        self.variant_ref
                    )));
                }
            }
            (None, None) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{}: only one embedding present",
                    self.variant_ref
                )))
            }
        }
        Ok(())
    }
}

pub fn check_k(k: usize) -> Result<()> {
    if (1..=MAX_K).contains(&k) {
        Ok(())
    } else {
        Err(Error::KOutOfRange(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CoarseClass {
    IdentifierLike,
    OperatorLike,
    LiteralLike,
}

impl CoarseClass {
    pub fn of_kind(kind: TokenKind) -> Option<Self> {
        match kind {
            TokenKind::Identifier => Some(CoarseClass::IdentifierLike),
            TokenKind::Operator => Some(CoarseClass::OperatorLike),
            k if k.is_literal() => Some(CoarseClass::LiteralLike),
            _ => None,
        }
    }

    /// Class of a single-token string; `None` for keywords, separators and
    /// anything that does not lex to exactly one token.
    pub fn of_text(text: &str) -> Option<Self> {
        let seq = lexing::lex_grammar_lenient(text);
        let mut sig = seq.significant();
        match (sig.next(), sig.next()) {
            (Some((_, t)), None) if t.len == text.len() => Self::of_kind(t.kind),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Ranked {
    /// (token, count), most frequent first, ties by token text.
    entries: Vec<(String, u64)>,
    total: u64,
}

impl Ranked {
    fn from_counts<'a>(counts: impl Iterator<Item = (&'a String, &'a u64)>) -> Self {
        let mut entries: Vec<(String, u64)> = counts
            .filter(|(_, c)| **c > 0)
            .map(|(t, c)| (t.clone(), *c))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let total = entries.iter().map(|e| e.1).sum();
        Ranked { entries, total }
    }

    fn top(&self, k: usize) -> Vec<Proposition> {
        self.entries
            .iter()
            .take(k)
            .map(|(t, c)| Proposition {
                token: t.clone(),
                confidence: *c as f64 / self.total as f64,
            })
            .collect()
    }
}

/// Ranked tables for one frequency source: all tokens, and per class.
#[derive(Debug, Clone)]
struct ClassTables {
    global: Ranked,
    by_class: BTreeMap<CoarseClass, Ranked>,
}

impl ClassTables {
    fn new(counts: &BTreeMap<String, u64>, classes: &BTreeMap<String, Option<CoarseClass>>) -> Self {
        let mut split: BTreeMap<CoarseClass, BTreeMap<String, u64>> = BTreeMap::new();
        for (t, c) in counts {
            let class = classes
                .get(t)
                .copied()
                .unwrap_or_else(|| CoarseClass::of_text(t));
            if let Some(class) = class {
                split.entry(class).or_default().insert(t.clone(), *c);
            }
        }
        ClassTables {
            global: Ranked::from_counts(counts.iter()),
            by_class: split
                .iter()
                .map(|(class, m)| (*class, Ranked::from_counts(m.iter())))
                .filter(|(_, r)| !r.entries.is_empty())
                .collect(),
        }
    }

    fn lookup(&self, class: Option<CoarseClass>) -> Option<&Ranked> {
        match class {
            Some(c) => self.by_class.get(&c),
            None => Some(&self.global).filter(|r| !r.entries.is_empty()),
        }
    }
}

/// Frequency table backing the stub oracle.
///
/// Built from plain counts it proposes the most frequent tokens of the
/// masked token's class. Built from sources it also keeps, for every pair of
/// immediate neighbours, the counts of the tokens seen between them; a mask
/// whose neighbour pair was seen is answered from that table first.
#[derive(Debug, Clone)]
pub struct StubVocab {
    base: ClassTables,
    /// `(left, right)` neighbours -> tables of the tokens seen between them.
    /// An empty string stands for a sequence edge.
    contexts: BTreeMap<(String, String), ClassTables>,
}

impl StubVocab {
    pub fn new(counts: &BTreeMap<String, u64>) -> Result<Self> {
        let base = ClassTables::new(counts, &BTreeMap::new());
        if base.global.entries.is_empty() {
            return Err(Error::EmptyVocab);
        }
        Ok(StubVocab {
            base,
            contexts: BTreeMap::new(),
        })
    }

    /// Token and neighbour-pair counts over the code tokens of `sources`.
    pub fn from_sources<'a>(sources: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut between: BTreeMap<(String, String), BTreeMap<String, u64>> = BTreeMap::new();
        for src in sources {
            let seq = lexing::lex_grammar_lenient(src);
            let toks: Vec<&str> = seq.significant().map(|(_, t)| t.text.as_str()).collect();
            for (i, t) in toks.iter().enumerate() {
                *counts.entry(t.to_string()).or_insert(0) += 1;
                let left = if i > 0 { toks[i - 1] } else { "" };
                let right = toks.get(i + 1).copied().unwrap_or("");
                *between
                    .entry((left.to_string(), right.to_string()))
                    .or_default()
                    .entry(t.to_string())
                    .or_insert(0) += 1;
            }
        }
        let classes: BTreeMap<String, Option<CoarseClass>> = counts
            .keys()
            .map(|t| (t.clone(), CoarseClass::of_text(t)))
            .collect();
        let base = ClassTables::new(&counts, &classes);
        if base.global.entries.is_empty() {
            return Err(Error::EmptyVocab);
        }
        let contexts = between
            .into_iter()
            .map(|(key, m)| (key, ClassTables::new(&m, &classes)))
            .collect();
        Ok(StubVocab { base, contexts })
    }

    /// Counts the code tokens of `sources` (grammar tokenizer, trivia dropped).
    pub fn count_tokens<'a>(sources: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        for src in sources {
            for (_, t) in lexing::lex_grammar_lenient(src).significant() {
                *counts.entry(t.text.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn has_contexts(&self) -> bool {
        !self.contexts.is_empty()
    }

    /// Top-`k` propositions for a token of the given class, falling back to
    /// global frequencies when the class is unknown or empty.
    pub fn propose(&self, class: Option<CoarseClass>, k: usize) -> Vec<Proposition> {
        self.base
            .lookup(class)
            .unwrap_or(&self.base.global)
            .top(k)
    }

    /// Like [`StubVocab::propose`], answered from the neighbour-pair table
    /// when it holds tokens of the class.
    pub fn propose_between(
        &self,
        class: Option<CoarseClass>,
        left: &str,
        right: &str,
        k: usize,
    ) -> Vec<Proposition> {
        if !self.contexts.is_empty() {
            // BTreeMap<(String, String), _> cannot be probed with borrowed strs.
            let key = (left.to_string(), right.to_string());
            if let Some(r) = self.contexts.get(&key).and_then(|t| t.lookup(class)) {
                return r.top(k);
            }
        }
        self.propose(class, k)
    }

    /// Propositions for the placeholder at `mask_pos` of `window`.
    pub fn propose_for_window<S: AsRef<str>>(
        &self,
        class: Option<CoarseClass>,
        window: &[S],
        mask_pos: usize,
        k: usize,
    ) -> Vec<Proposition> {
        let left = if mask_pos > 0 {
            window[mask_pos - 1].as_ref()
        } else {
            ""
        };
        let right = window.get(mask_pos + 1).map_or("", |s| s.as_ref());
        self.propose_between(class, left, right, k)
    }
}

/// Answers every variant with the stub oracle, in input order.
pub fn stub_query(
    variants: &[MaskedVariant],
    k: usize,
    want_embeddings: bool,
    vocab: &StubVocab,
) -> Result<Vec<PredictionRecord>> {
    check_k(k)?;
    Ok(variants
        .iter()
        .map(|v| {
            let class = CoarseClass::of_kind(v.site.kind);
            let propositions = vocab.propose_for_window(class, &v.window, v.mask_pos, k);
            let (embedding_original, embedding_predicted) = if want_embeddings {
                let original = hashed_embedding(&v.filled_with(&v.site.original_text));
                let predicted = hashed_embedding(&v.filled_with(&propositions[0].token));
                (Some(original), Some(predicted))
            } else {
                (None, None)
            };
            PredictionRecord {
                variant_ref: VariantRef::of(&v.site),
                propositions,
                embedding_original,
                embedding_predicted,
            }
        })
        .collect())
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stub_bucket(token: &str) -> usize {
    (fnv1a(token.as_bytes()) % STUB_DIM as u64) as usize
}

/// Bag of tokens hashed into [`STUB_DIM`] buckets, L2-normalized.
pub fn hashed_embedding<S: AsRef<str>>(window: &[S]) -> Vec<f64> {
    let mut v = alloc::vec![0.0f64; STUB_DIM];
    for t in window {
        v[stub_bucket(t.as_ref())] += 1.0;
    }
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl PredictionRecord {
    /// Rank-1 proposition text.
    pub fn best(&self) -> &str {
        self.propositions
            .first()
            .map(|p| p.token.as_str())
            .unwrap_or_default()
    }
}

impl core::fmt::Display for CoarseClass {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            CoarseClass::IdentifierLike => "identifier",
            CoarseClass::OperatorLike => "operator",
            CoarseClass::LiteralLike => "literal",
        })
    }
}

//! Mask-site selection and bounded context windows around each mask.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lexing::{TokenKind, TokenSequence};

/// Literal placeholder the oracle fills.
pub const PLACEHOLDER: &str = "<mask>";

/// Encoder limit of the reference oracle, in sub-tokens.
pub const ORACLE_LIMIT: usize = 512;

/// Lexical-token budget passed by default; leaves room for sub-token expansion.
pub const DEFAULT_BUDGET: usize = 256;

/// Token kinds that produce mask sites by default.
pub const DEFAULT_MASKABLE: &[TokenKind] = &[
    TokenKind::Identifier,
    TokenKind::LiteralNumber,
    TokenKind::LiteralString,
    TokenKind::LiteralChar,
    TokenKind::LiteralBoolNull,
    TokenKind::Operator,
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaskSite {
    pub file: String,
    pub line_no: usize,
    /// Index into the full grammar token sequence of the file.
    pub token_index: usize,
    pub original_text: String,
    pub kind: TokenKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedVariant {
    pub site: MaskSite,
    /// Context tokens with exactly one [`PLACEHOLDER`].
    pub window: Vec<String>,
    /// Position of the placeholder inside `window`.
    pub mask_pos: usize,
    pub window_budget: usize,
}

impl MaskedVariant {
    /// The window with the placeholder replaced by `text`.
    pub fn filled_with(&self, text: &str) -> Vec<String> {
        let mut w = self.window.clone();
        w[self.mask_pos] = text.to_string();
        w
    }
}

/// One site per maskable token on each requested line, in source order.
pub fn extract_sites(
    seq: &TokenSequence,
    lines: &BTreeSet<usize>,
    maskable: &[TokenKind],
) -> Vec<MaskSite> {
    seq.tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| lines.contains(&t.line_no) && maskable.contains(&t.kind))
        .filter(|(_, t)| !t.text.is_empty())
        .map(|(i, t)| MaskSite {
            file: seq.source.clone(),
            line_no: t.line_no,
            token_index: i,
            original_text: t.text.clone(),
            kind: t.kind,
        })
        .collect()
}

/// Significant tokens of one file, indexed for repeated window rendering.
#[derive(Debug, Clone)]
pub struct WindowSource {
    texts: Vec<String>,
    /// Full-sequence index -> position among significant tokens.
    position: Vec<Option<usize>>,
}

impl WindowSource {
    pub fn new(seq: &TokenSequence) -> Self {
        let mut texts = Vec::new();
        let mut position = Vec::with_capacity(seq.tokens.len());
        for t in &seq.tokens {
            if t.kind.is_trivia() {
                position.push(None);
            } else {
                position.push(Some(texts.len()));
                texts.push(t.text.clone());
            }
        }
        WindowSource { texts, position }
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn render(&self, site: &MaskSite, budget: usize) -> Result<MaskedVariant> {
        if budget < 3 {
            return Err(Error::BudgetTooSmall(budget));
        }
        let center = self
            .position
            .get(site.token_index)
            .copied()
            .flatten()
            .ok_or(Error::SiteOutOfRange(site.token_index))?;
        let (lo, hi) = window_bounds(self.texts.len(), center, budget);
        let mut window: Vec<String> = self.texts[lo..=hi].to_vec();
        window[center - lo] = PLACEHOLDER.to_string();
        Ok(MaskedVariant {
            site: site.clone(),
            window,
            mask_pos: center - lo,
            window_budget: budget,
        })
    }
}

/// Replaces the site token by the placeholder, drops whitespace and comments,
/// and keeps at most `budget` tokens around the mask.
pub fn render_variant(seq: &TokenSequence, site: &MaskSite, budget: usize) -> Result<MaskedVariant> {
    WindowSource::new(seq).render(site, budget)
}

/// Inclusive bounds of the window grown alternately left, right, left, ...
/// from `center` until `budget` tokens are taken or the sequence runs out.
pub fn window_bounds(len: usize, center: usize, budget: usize) -> (usize, usize) {
    let extra = budget.saturating_sub(1);
    let avail_left = center;
    let avail_right = len - 1 - center;
    // Left takes the odd steps, so it gets the rounding-up half.
    let mut left = avail_left.min(extra.div_ceil(2));
    let right = avail_right.min(extra - left);
    left = avail_left.min(extra - right);
    (center - left, center + right)
}

//! Per-token naturalness scores derived from oracle predictions.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::masking::MaskSite;
use crate::oracle::{PredictionRecord, VariantRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Metric {
    Conf,
    Cos,
    Acc,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Conf, Metric::Cos, Metric::Acc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Conf => "conf",
            Metric::Cos => "cos",
            Metric::Acc => "acc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenScore {
    pub variant_ref: VariantRef,
    pub conf: f64,
    /// Absent when the record carried no embeddings.
    pub cos: Option<f64>,
    pub acc: f64,
    pub k_used: usize,
}

impl TokenScore {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Conf => Some(self.conf),
            Metric::Cos => self.cos,
            Metric::Acc => Some(self.acc),
        }
    }
}

fn take_k(r: &PredictionRecord, k: usize) -> Result<&[crate::oracle::Proposition]> {
    if k == 0 || k > r.propositions.len() {
        return Err(Error::NotEnoughPropositions {
            k,
            available: r.propositions.len(),
        });
    }
    Ok(&r.propositions[..k])
}

/// Rank-1 confidence for `k = 1`, mean of the top-`k` confidences otherwise.
pub fn conf_score(r: &PredictionRecord, k: usize) -> Result<f64> {
    let top = take_k(r, k)?;
    Ok(top.iter().map(|p| p.confidence).sum::<f64>() / k as f64)
}

/// Cosine between the original and predicted window embeddings.
pub fn cos_score(r: &PredictionRecord) -> Result<f64> {
    match (&r.embedding_original, &r.embedding_predicted) {
        (Some(o), Some(p)) => cosine(o, p),
        _ => Err(Error::MissingEmbeddings),
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Fraction of the top-`k` propositions equal to the original token after
/// trimming surrounding whitespace; 0 or 1 when `k = 1`.
pub fn acc_score(r: &PredictionRecord, site: &MaskSite, k: usize) -> Result<f64> {
    let top = take_k(r, k)?;
    let original = site.original_text.trim();
    let hits = top.iter().filter(|p| p.token.trim() == original).count();
    Ok(hits as f64 / k as f64)
}

/// Joins records to sites one-to-one and applies the three scorers.
/// The output follows the order of `sites`.
pub fn token_scores(
    records: &[PredictionRecord],
    sites: &[MaskSite],
    k: usize,
) -> Result<Vec<TokenScore>> {
    let mut by_ref: BTreeMap<VariantRef, &PredictionRecord> = BTreeMap::new();
    for r in records {
        if by_ref.insert(r.variant_ref.clone(), r).is_some() {
            return Err(Error::UnmatchedRecord(r.variant_ref.to_string()));
        }
    }
    if records.len() != sites.len() {
        let site_refs: alloc::collections::BTreeSet<VariantRef> =
            sites.iter().map(VariantRef::of).collect();
        let stray = by_ref
            .keys()
            .find(|r| !site_refs.contains(*r))
            .map(|r| r.to_string())
            .or_else(|| {
                site_refs
                    .iter()
                    .find(|r| !by_ref.contains_key(*r))
                    .map(|r| r.to_string())
            })
            .unwrap_or_default();
        return Err(Error::UnmatchedRecord(stray));
    }
    sites
        .iter()
        .map(|site| {
            let vref = VariantRef::of(site);
            let r = by_ref
                .get(&vref)
                .ok_or_else(|| Error::UnmatchedRecord(vref.to_string()))?;
            let cos = if r.embedding_original.is_some() {
                Some(cos_score(r)?)
            } else {
                None
            };
            // A small vocabulary may offer fewer than k propositions.
            let k_used = k.min(r.propositions.len());
            Ok(TokenScore {
                variant_ref: vref,
                conf: conf_score(r, k_used)?,
                cos,
                acc: acc_score(r, site, k_used)?,
                k_used,
            })
        })
        .collect()
}

//! Collapsing per-token scores into one value per line.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::metrics::{Metric, TokenScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Aggregator {
    Min,
    Max,
    Mean,
    Median,
    Entropy,
}

impl Aggregator {
    pub const ALL: [Aggregator; 5] = [
        Aggregator::Min,
        Aggregator::Max,
        Aggregator::Mean,
        Aggregator::Median,
        Aggregator::Entropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Min => "min",
            Aggregator::Max => "max",
            Aggregator::Mean => "mean",
            Aggregator::Median => "median",
            Aggregator::Entropy => "entropy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Entropy needs strictly positive scores, which accuracy does not give.
    pub fn supports(self, metric: Metric) -> bool {
        !(self == Aggregator::Entropy && metric == Metric::Acc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineScore {
    pub file: String,
    pub line_no: usize,
    pub metric: Metric,
    pub aggregator: Aggregator,
    pub value: f64,
    pub n_tokens: usize,
}

/// Aggregates a nonempty score list. The median of an even count is the
/// lower-middle element; entropy is `-(sum of ln s_i) / n`.
pub fn aggregate_line(scores: &[f64], how: Aggregator) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let n = scores.len() as f64;
    Ok(match how {
        Aggregator::Min => scores.iter().copied().fold(f64::INFINITY, f64::min),
        Aggregator::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregator::Mean => scores.iter().sum::<f64>() / n,
        Aggregator::Median => {
            let mut sorted = scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            sorted[(sorted.len() - 1) / 2]
        }
        Aggregator::Entropy => {
            if scores.iter().any(|&s| s.is_nan() || s <= 0.0) {
                return Err(Error::EntropyUndefined);
            }
            let h = -scores.iter().map(|&s| libm::log(s)).sum::<f64>() / n;
            // ln(1) terms sum to -0.0
            if h == 0.0 {
                0.0
            } else {
                h
            }
        }
    })
}

/// One [`LineScore`] per `(file, line)` having at least one token score,
/// sorted by `(file, line)`.
pub fn line_scores(
    token_scores: &[TokenScore],
    metric: Metric,
    how: Aggregator,
) -> Result<Vec<LineScore>> {
    if !how.supports(metric) {
        return Err(Error::EntropyUndefined);
    }
    let mut grouped: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for ts in token_scores {
        let v = ts
            .get(metric)
            .ok_or_else(|| Error::CosineAbsent(alloc::string::ToString::to_string(&ts.variant_ref)))?;
        grouped
            .entry((ts.variant_ref.file.as_str(), ts.variant_ref.line))
            .or_default()
            .push(v);
    }
    grouped
        .into_iter()
        .map(|((file, line_no), values)| {
            Ok(LineScore {
                file: file.into(),
                line_no,
                metric,
                aggregator: how,
                value: aggregate_line(&values, how)?,
                n_tokens: values.len(),
            })
        })
        .collect()
}

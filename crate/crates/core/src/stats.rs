//! Paired comparison statistics: Vargha-Delaney A12, the Wilcoxon
//! signed-rank test and population standard deviations.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Matched `(x, y)` observations, one pair per bug.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pairs: Vec<(f64, f64)>,
    pub lower_is_better: bool,
}

impl PairedSample {
    pub fn new(pairs: Vec<(f64, f64)>, lower_is_better: bool) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("paired sample is empty".into()));
        }
        if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidArgument("paired sample has a non-finite value".into()));
        }
        Ok(PairedSample {
            pairs,
            lower_is_better,
        })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The same pairs with `x` and `y` swapped.
    pub fn swapped(&self) -> Self {
        PairedSample {
            pairs: self.pairs.iter().map(|&(x, y)| (y, x)).collect(),
            lower_is_better: self.lower_is_better,
        }
    }
}

fn beats(x: f64, y: f64, lower_is_better: bool) -> bool {
    if lower_is_better {
        x < y
    } else {
        x > y
    }
}

/// Paired A12: per-pair win fraction of `x` over `y`, ties counting half.
pub fn a12(s: &PairedSample) -> f64 {
    let mut score = 0.0;
    for &(x, y) in &s.pairs {
        if x == y {
            score += 0.5;
        } else if beats(x, y, s.lower_is_better) {
            score += 1.0;
        }
    }
    score / s.pairs.len() as f64
}

/// Unpaired A12 over all `|xs| * |ys|` cross pairs.
pub fn a12_unpaired(xs: &[f64], ys: &[f64], lower_is_better: bool) -> Option<f64> {
    if xs.is_empty() || ys.is_empty() {
        return None;
    }
    // Rank-sum form: sort ys once and count wins and ties by binary search.
    let mut sorted = ys.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut score = 0.0;
    for &x in xs {
        let below = sorted.partition_point(|&y| y < x);
        let not_above = sorted.partition_point(|&y| y <= x);
        let ties = not_above - below;
        let wins = if lower_is_better {
            sorted.len() - not_above
        } else {
            below
        };
        score += wins as f64 + 0.5 * ties as f64;
    }
    Some(score / (xs.len() * ys.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub w: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Number of nonzero differences.
    pub n: usize,
    pub exact: bool,
    /// All differences were zero.
    pub degenerate: bool,
}

/// Largest nonzero-pair count handled by exact enumeration.
pub const EXACT_LIMIT: usize = 20;

/// Signed ranks of the nonzero differences `x - y`, average ranks for ties.
pub fn signed_ranks(s: &PairedSample) -> Vec<f64> {
    let mut diffs: Vec<f64> = s
        .pairs
        .iter()
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    diffs.sort_by(|a, b| libm::fabs(*a).total_cmp(&libm::fabs(*b)));
    let mut out = vec![0.0; diffs.len()];
    let mut i = 0;
    while i < diffs.len() {
        let mut j = i + 1;
        while j < diffs.len() && libm::fabs(diffs[j]) == libm::fabs(diffs[i]) {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for k in i..j {
            out[k] = if diffs[k] > 0.0 { avg } else { -avg };
        }
        i = j;
    }
    out
}

/// Two-sided Wilcoxon signed-rank test. Zero differences are dropped; the
/// p-value is exact up to [`EXACT_LIMIT`] nonzero pairs and otherwise uses
/// the normal approximation with continuity and tie corrections.
pub fn wilcoxon_signed_rank(s: &PairedSample) -> WilcoxonResult {
    let ranks = signed_ranks(s);
    let n = ranks.len();
    if n == 0 {
        return WilcoxonResult {
            w: 0.0,
            p: 1.0,
            n: 0,
            exact: true,
            degenerate: true,
        };
    }
    let w_plus: f64 = ranks.iter().filter(|r| **r > 0.0).sum();
    let w_minus: f64 = -ranks.iter().filter(|r| **r < 0.0).sum::<f64>();
    let w = w_plus.min(w_minus);
    let abs_ranks: Vec<f64> = ranks.iter().map(|r| libm::fabs(*r)).collect();
    let (p, exact) = if n <= EXACT_LIMIT {
        (exact_p(&abs_ranks, w), true)
    } else {
        (normal_p(&abs_ranks, w), false)
    };
    WilcoxonResult {
        w,
        p,
        n,
        exact,
        degenerate: false,
    }
}

/// `min(1, 2 P(T+ <= w))` from the exact null distribution of `T+`.
fn exact_p(abs_ranks: &[f64], w: f64) -> f64 {
    // Average ranks are multiples of 1/2, so doubled ranks are integers.
    let doubled: Vec<usize> = abs_ranks.iter().map(|r| libm::round(r * 2.0) as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut ways = vec![0.0f64; max + 1];
    ways[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if ways[s] > 0.0 {
                ways[s + r] += ways[s];
            }
        }
        reach += r;
    }
    let limit = libm::round(w * 2.0) as usize;
    let below: f64 = ways[..=limit.min(max)].iter().sum();
    let total = libm::pow(2.0, abs_ranks.len() as f64);
    (2.0 * below / total).min(1.0)
}

/// Normal-approximation p-value of the sample regardless of its size, for
/// comparison with the exact value.
pub fn wilcoxon_normal_p(s: &PairedSample) -> Option<f64> {
    let ranks = signed_ranks(s);
    if ranks.is_empty() {
        return None;
    }
    let w_plus: f64 = ranks.iter().filter(|r| **r > 0.0).sum();
    let w_minus: f64 = -ranks.iter().filter(|r| **r < 0.0).sum::<f64>();
    let abs_ranks: Vec<f64> = ranks.iter().map(|r| libm::fabs(*r)).collect();
    Some(normal_p(&abs_ranks, w_plus.min(w_minus)))
}

fn normal_p(abs_ranks: &[f64], w: f64) -> f64 {
    let n = abs_ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < abs_ranks.len() {
        let mut j = i + 1;
        while j < abs_ranks.len() && abs_ranks[j] == abs_ranks[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (libm::fabs(w - mean) - 0.5).max(0.0) / libm::sqrt(var);
    libm::erfc(z / core::f64::consts::SQRT_2).min(1.0)
}

/// Population standard deviation; `None` for fewer than two values.
pub fn population_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(libm::sqrt(var))
}

/// Population SD of each bug's scores.
pub fn per_bug_sd(groups: &BTreeMap<String, Vec<f64>>) -> BTreeMap<String, Option<f64>> {
    groups
        .iter()
        .map(|(bug, scores)| (bug.clone(), population_sd(scores)))
        .collect()
}

/// Quartile summary used for box-plot style reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Quartiles with linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let lo = libm::floor(pos) as usize;
        let hi = libm::ceil(pos) as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some(Quartiles {
        min: v[0],
        q1: at(0.25),
        median: at(0.5),
        q3: at(0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

//! Tie-aware line ranking and per-bug outcome measures.
//!
//! Lines sharing a value form a tie block; instead of breaking ties with a
//! random draw, every line gets its expected rank under a uniform random
//! permutation of the block. Lines without a value share one trailing block.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::LineRecord;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LineRef {
    pub file: String,
    pub line: usize,
}

impl LineRef {
    pub fn new(file: impl Into<String>, line: usize) -> Self {
        LineRef {
            file: file.into(),
            line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SortOrder {
    /// Lowest value ranked first.
    Asc,
    /// Highest value ranked first.
    Desc,
}

impl SortOrder {
    pub fn name(self) -> &'static str {
        match self {
            SortOrder::Asc => "asc",
            SortOrder::Desc => "desc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "asc" => Some(SortOrder::Asc),
            "desc" => Some(SortOrder::Desc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedLine {
    pub line_ref: LineRef,
    pub value: Option<f64>,
    /// Expected rank inside the line's tie block.
    pub rank: f64,
    pub norm_rank: f64,
    /// First rank of the tie block (1-based).
    pub block_start: usize,
    pub block_size: usize,
}

/// Ranks lines by value. Equal values share a tie block; absent (or NaN)
/// values form a single trailing block. The output is sorted by block, then
/// by line reference.
pub fn rank_lines(values: &BTreeMap<LineRef, Option<f64>>, order: SortOrder) -> Vec<RankedLine> {
    let total = values.len();
    let mut valued: Vec<(&LineRef, f64)> = Vec::new();
    let mut absent: Vec<&LineRef> = Vec::new();
    for (r, v) in values {
        match v {
            Some(x) if !x.is_nan() => valued.push((r, *x)),
            _ => absent.push(r),
        }
    }
    let cmp = |a: &f64, b: &f64| -> Ordering {
        match order {
            SortOrder::Asc => a.total_cmp(b),
            SortOrder::Desc => b.total_cmp(a),
        }
    };
    valued.sort_by(|a, b| cmp(&a.1, &b.1).then_with(|| a.0.cmp(b.0)));

    let mut out = Vec::with_capacity(total);
    let mut push_block = |members: &mut dyn Iterator<Item = (&LineRef, Option<f64>)>,
                          start: usize,
                          size: usize| {
        let rank = start as f64 + (size as f64 - 1.0) / 2.0;
        for (r, v) in members {
            out.push(RankedLine {
                line_ref: r.clone(),
                value: v,
                rank,
                norm_rank: rank / total as f64,
                block_start: start,
                block_size: size,
            });
        }
    };
    let mut i = 0;
    while i < valued.len() {
        let mut j = i + 1;
        // -0.0 and 0.0 compare equal and belong to one block
        while j < valued.len() && valued[j].1 == valued[i].1 {
            j += 1;
        }
        push_block(
            &mut valued[i..j].iter().map(|(r, v)| (*r, Some(*v))),
            i + 1,
            j - i,
        );
        i = j;
    }
    if !absent.is_empty() {
        push_block(
            &mut absent.iter().map(|r| (*r, None)),
            valued.len() + 1,
            absent.len(),
        );
    }
    out
}

/// Expected position of the first buggy line and mean position of the buggy
/// lines when `buggy` of the `size` lines of a block starting at rank `start`
/// are placed uniformly at random. `None` when the block holds no buggy line.
pub fn expected_ranks(start: usize, size: usize, buggy: usize) -> Option<(f64, f64)> {
    if buggy == 0 || buggy > size {
        return None;
    }
    let offset = start as f64 - 1.0;
    let first = offset + (size as f64 + 1.0) / (buggy as f64 + 1.0);
    let mean = offset + (size as f64 + 1.0) / 2.0;
    Some((first, mean))
}

/// Normalized outcome of one ranking for one bug.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub first_hit: f64,
    pub mean_rank: f64,
}

/// First-hit and mean expected rank of the buggy lines, both divided by the
/// number of ranked lines. `None` when no ranked line is buggy.
pub fn bug_outcome(ranked: &[RankedLine], buggy: &BTreeSet<LineRef>) -> Option<Outcome> {
    let total = ranked.len();
    // block start -> (size, buggy members)
    let mut blocks: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in ranked {
        let e = blocks.entry(r.block_start).or_insert((r.block_size, 0));
        if buggy.contains(&r.line_ref) {
            e.1 += 1;
        }
    }
    let mut first_hit: Option<f64> = None;
    let mut rank_sum = 0.0;
    let mut n_buggy = 0usize;
    for (&start, &(size, b)) in &blocks {
        if let Some((first, mean)) = expected_ranks(start, size, b) {
            first_hit.get_or_insert(first);
            rank_sum += mean * b as f64;
            n_buggy += b;
        }
    }
    let first = first_hit?;
    Some(Outcome {
        first_hit: first / total as f64,
        mean_rank: rank_sum / n_buggy as f64 / total as f64,
    })
}

/// Analytic outcome of a uniformly random ranking of `total` lines holding
/// `buggy` buggy lines.
pub fn random_baseline(total: usize, buggy: usize) -> Option<Outcome> {
    let (first, mean) = expected_ranks(1, total, buggy)?;
    Some(Outcome {
        first_hit: first / total as f64,
        mean_rank: mean / total as f64,
    })
}

/// Lines valued by their grammar-token count; rank them with [`SortOrder::Desc`].
pub fn complexity_baseline(lines: &[LineRecord]) -> BTreeMap<LineRef, Option<f64>> {
    lines
        .iter()
        .map(|l| (LineRef::new(l.file.clone(), l.line_no), Some(l.token_count as f64)))
        .collect()
}

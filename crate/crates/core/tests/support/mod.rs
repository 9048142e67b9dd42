//! Independent reference implementations shared by the test targets.

use std::collections::HashMap;

use natrank_core::stats::PairedSample;

/// Textbook interpolated Kneser-Ney over string grams, written from scratch.
pub struct ReferenceKn {
    n: usize,
    vocab: Vec<String>,
    /// counts[j-1]: order-j gram -> raw count (top) or continuation count.
    counts: Vec<HashMap<Vec<String>, f64>>,
    discounts: Vec<f64>,
}

impl ReferenceKn {
    pub fn train(lines: &[Vec<&str>], n: usize, k: u64) -> Self {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for l in lines {
            for t in l {
                *freq.entry(t).or_default() += 1;
            }
        }
        let keep = |t: &str| freq[t] > k;
        let mut vocab: Vec<String> = vec!["</s>".into(), "<UNK>".into()];
        let mut kept: Vec<String> = freq.keys().filter(|t| keep(t)).map(|t| t.to_string()).collect();
        kept.sort();
        vocab.extend(kept);

        // All grams of every order ending at a real position of a padded line.
        let mut raw: Vec<HashMap<Vec<String>, f64>> = vec![HashMap::new(); n];
        for l in lines {
            let mut seq: Vec<String> = vec!["<s>".into(); n - 1];
            seq.extend(l.iter().map(|t| if keep(t) { t.to_string() } else { "<UNK>".into() }));
            seq.push("</s>".into());
            for end in n - 1..seq.len() {
                for j in 1..=n {
                    *raw[j - 1].entry(seq[end + 1 - j..=end].to_vec()).or_default() += 1.0;
                }
            }
        }
        let mut counts = Vec::new();
        for j in 1..=n {
            if j == n {
                counts.push(raw[j - 1].clone());
            } else {
                let mut cont: HashMap<Vec<String>, f64> = HashMap::new();
                for g in raw[j].keys() {
                    *cont.entry(g[1..].to_vec()).or_default() += 1.0;
                }
                counts.push(cont);
            }
        }
        let discounts = counts
            .iter()
            .map(|m| {
                let n1 = m.values().filter(|c| **c == 1.0).count() as f64;
                let n2 = m.values().filter(|c| **c == 2.0).count() as f64;
                if n2 == 0.0 { 0.5 } else { n1 / (n1 + 2.0 * n2) }
            })
            .collect();
        ReferenceKn { n, vocab, counts, discounts }
    }

    fn p(&self, ctx: &[String], t: &str) -> f64 {
        let j = ctx.len() + 1;
        let table = &self.counts[j - 1];
        let d = self.discounts[j - 1];
        let mut total = 0.0;
        let mut types = 0.0;
        let mut c = 0.0;
        for (g, v) in table {
            if g[..j - 1] == *ctx {
                total += v;
                types += 1.0;
                if g[j - 1] == t {
                    c = *v;
                }
            }
        }
        let lower = if j == 1 {
            1.0 / self.vocab.len() as f64
        } else {
            self.p(&ctx[1..], t)
        };
        if total == 0.0 {
            return lower;
        }
        ((c - d).max(0.0) + d * types * lower) / total
    }

    pub fn prob(&self, ctx: &[&str], t: &str) -> f64 {
        let known = |s: &str| if self.vocab.iter().any(|v| v == s) || s == "<s>" { s.to_string() } else { "<UNK>".into() };
        let keep = ctx.len().min(self.n - 1);
        let c: Vec<String> = ctx[ctx.len() - keep..].iter().map(|s| known(s)).collect();
        let t = if t == "<s>" { "<UNK>".to_string() } else { known(t) };
        self.p(&c, &t)
    }
}

pub fn brute_a12(pairs: &[(f64, f64)], lower: bool) -> f64 {
    let mut wins = 0u32;
    let mut ties = 0u32;
    for &(x, y) in pairs {
        if x == y {
            ties += 1;
        } else if (x < y) == lower {
            wins += 1;
        }
    }
    (2 * wins + ties) as f64 / (2 * pairs.len()) as f64
}

/// `min(1, 2 * share of sign assignments whose positive rank sum <= w)`.
pub fn enumerated_p(s: &PairedSample) -> f64 {
    let mut diffs: Vec<f64> = s.pairs().iter().map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    diffs.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    let n = diffs.len();
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && diffs[j].abs() == diffs[i].abs() {
            j += 1;
        }
        for r in &mut ranks[i..j] {
            *r = (i + j + 1) as f64 / 2.0;
        }
        i = j;
    }
    let plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total: f64 = ranks.iter().sum();
    let w = plus.min(total - plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let t: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if t <= w + 1e-9 {
            hits += 1;
        }
    }
    (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0)
}

use std::collections::HashMap;

use super::MetricError;
use crate::parser::TokenSequence;

/// Clipped n-gram statistics for one hypothesis, summable across a corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BleuStats {
    /// Clipped matches per order (index 0 = unigrams).
    pub matches: [u64; 4],
    /// Hypothesis n-gram totals per order.
    pub totals: [u64; 4],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..4 {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// BLEU with n-gram orders 1..=max_n from accumulated counts.
    ///
    /// Unsmoothed: any zero precision yields 0. With `smooth`, orders above
    /// one use add-one counts.
    pub fn score(&self, max_n: usize, smooth: bool) -> Result<f64, MetricError> {
        if !(1..=4).contains(&max_n) {
            return Err(MetricError::InvalidOrder(max_n));
        }
        if self.hyp_len == 0 {
            return Err(MetricError::EmptyHypothesis);
        }
        let mut log_sum = 0.0;
        for n in 0..max_n {
            let (m, t) = if smooth && n > 0 {
                (self.matches[n] + 1, self.totals[n] + 1)
            } else {
                (self.matches[n], self.totals[n])
            };
            if m == 0 || t == 0 {
                return Ok(0.0);
            }
            log_sum += (m as f64 / t as f64).ln();
        }
        let c = self.hyp_len as f64;
        let r = self.ref_len as f64;
        let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
        Ok(bp * (log_sum / max_n as f64).exp())
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level statistics against one or more references. Counts are
/// clipped by the maximum count in any single reference; the effective
/// reference length is the one closest to the hypothesis length (shorter
/// wins ties).
pub fn bleu_stats(hyp: &TokenSequence, refs: &[TokenSequence]) -> BleuStats {
    let mut stats = BleuStats {
        hyp_len: hyp.len() as u64,
        ..Default::default()
    };
    for n in 1..=4 {
        let hyp_counts = ngram_counts(&hyp.tokens, n);
        let mut max_ref: HashMap<&[String], u64> = HashMap::new();
        for r in refs {
            for (gram, c) in ngram_counts(&r.tokens, n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
        stats.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
        stats.matches[n - 1] = hyp_counts
            .iter()
            .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
    }
    let c = hyp.len() as i64;
    stats.ref_len = refs
        .iter()
        .map(|r| r.len() as i64)
        .min_by_key(|&r| ((r - c).abs(), r))
        .unwrap_or(0) as u64;
    stats
}

/// Sentence BLEU with orders 1..=max_n, no smoothing.
pub fn bleu(hyp: &TokenSequence, refs: &[TokenSequence], max_n: usize) -> Result<f64, MetricError> {
    bleu_stats(hyp, refs).score(max_n, false)
}

/// Corpus BLEU: clipped counts and lengths are summed over all pairs before
/// forming the precisions.
pub fn corpus_bleu(
    pairs: &[(TokenSequence, Vec<TokenSequence>)],
    max_n: usize,
) -> Result<f64, MetricError> {
    let mut total = BleuStats::default();
    for (hyp, refs) in pairs {
        total.add(&bleu_stats(hyp, refs));
    }
    total.score(max_n, false)
}

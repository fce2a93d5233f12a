use rust_stemmers::{Algorithm, Stemmer};

use crate::model::Language;
use crate::parser::TokenSequence;

/// Unigram alignment between hypothesis and reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// (hyp index, ref index), sorted by hyp index.
    pub pairs: Vec<(usize, usize)>,
    pub chunks: usize,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }
}

pub(crate) fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    let mut chunks = 0;
    let mut last: Option<(usize, usize)> = None;
    for &(i, j) in pairs {
        match last {
            Some((pi, pj)) if i == pi + 1 && j == pj + 1 => {}
            _ => chunks += 1,
        }
        last = Some((i, j));
    }
    chunks
}

/// Greedy longest-contiguous-run matching over still-free positions. Ties
/// prefer the smallest offset |i - j|, then the earliest hypothesis position.
fn greedy_stage(
    hyp: &[String],
    reference: &[String],
    hyp_free: &mut [bool],
    ref_free: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
) {
    let (n, m) = (hyp.len(), reference.len());
    let mut run = vec![0usize; (n + 1) * (m + 1)];
    loop {
        let mut best: Option<(usize, usize, usize)> = None; // (len, end_i, end_j)
        for i in 0..n {
            for j in 0..m {
                let v = if hyp_free[i] && ref_free[j] && hyp[i] == reference[j] {
                    run[i * (m + 1) + j] + 1
                } else {
                    0
                };
                run[(i + 1) * (m + 1) + j + 1] = v;
                if v == 0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((len, bi, bj)) => {
                        let off = |a: usize, b: usize| a.abs_diff(b);
                        v > len || (v == len && off(i, j) < off(bi, bj))
                    }
                };
                if better {
                    best = Some((v, i, j));
                }
            }
        }
        let Some((len, end_i, end_j)) = best else {
            break;
        };
        for k in 0..len {
            let (i, j) = (end_i + 1 - len + k, end_j + 1 - len + k);
            hyp_free[i] = false;
            ref_free[j] = false;
            pairs.push((i, j));
        }
    }
}

/// Node budget for the exact chunk-minimizing search of one stage. Small
/// inputs are solved exactly; past the budget the best alignment found so
/// far (never worse than the greedy one) is kept.
const SEARCH_BUDGET: usize = 20_000;

struct StageSearch<'a> {
    hyp: &'a [String],
    /// Pairs fixed by an earlier stage, indexed by hyp position.
    fixed: Vec<Option<usize>>,
    hyp_free: &'a [bool],
    /// Reference positions of each token.
    positions: std::collections::HashMap<&'a str, Vec<usize>>,
    ref_used: Vec<bool>,
    /// How many more free hyp tokens of each string may stay unmatched.
    skips_left: std::collections::HashMap<&'a str, usize>,
    current: Vec<(usize, usize)>,
    best: Option<(usize, Vec<(usize, usize)>)>,
    nodes: usize,
}

impl StageSearch<'_> {
    fn run(&mut self, i: usize, last: Option<(usize, usize)>, chunks: usize) {
        self.nodes += 1;
        if self.nodes > SEARCH_BUDGET {
            return;
        }
        if let Some((b, _)) = &self.best {
            if chunks >= *b {
                return;
            }
        }
        if i == self.hyp.len() {
            self.best = Some((chunks, self.current.clone()));
            return;
        }
        let step = |last: Option<(usize, usize)>, j: usize| match last {
            Some((pi, pj)) if pi + 1 == i && pj + 1 == j => 0,
            _ => 1,
        };
        if let Some(j) = self.fixed[i] {
            self.run(i + 1, Some((i, j)), chunks + step(last, j));
            return;
        }
        if !self.hyp_free[i] {
            self.run(i + 1, last, chunks);
            return;
        }
        let token = self.hyp[i].as_str();
        let mut options: Vec<usize> = self
            .positions
            .get(token)
            .map(|ps| ps.iter().copied().filter(|&j| !self.ref_used[j]).collect())
            .unwrap_or_default();
        options.sort_by_key(|&j| (step(last, j), j.abs_diff(i), j));
        for j in options {
            self.ref_used[j] = true;
            self.current.push((i, j));
            self.run(i + 1, Some((i, j)), chunks + step(last, j));
            self.current.pop();
            self.ref_used[j] = false;
        }
        let left = self.skips_left.get(token).copied().unwrap_or(0);
        if left > 0 {
            self.skips_left.insert(token, left - 1);
            self.run(i + 1, last, chunks);
            self.skips_left.insert(token, left);
        }
    }
}

/// One matching stage: the maximum number of new matches, then the fewest
/// chunks over all pairs so far.
fn match_stage(
    hyp: &[String],
    reference: &[String],
    hyp_free: &mut [bool],
    ref_free: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
) {
    let before = pairs.len();
    greedy_stage(hyp, reference, hyp_free, ref_free, pairs);
    if pairs.len() == before {
        return;
    }
    let new: Vec<(usize, usize)> = pairs[before..].to_vec();
    // Undo the greedy picks; they only seed the upper bound.
    for &(i, j) in &new {
        hyp_free[i] = true;
        ref_free[j] = true;
    }
    let mut fixed = vec![None; hyp.len()];
    for &(i, j) in &pairs[..before] {
        fixed[i] = Some(j);
    }
    let mut all = pairs.clone();
    all.sort_unstable();
    let greedy_chunks = count_chunks(&all);
    if greedy_chunks <= 1 {
        // Nothing beats a single chunk.
        for &(i, j) in &new {
            hyp_free[i] = false;
            ref_free[j] = false;
        }
        return;
    }

    let mut free_h: std::collections::HashMap<&str, usize> = Default::default();
    let mut free_r: std::collections::HashMap<&str, usize> = Default::default();
    for (i, t) in hyp.iter().enumerate() {
        if hyp_free[i] {
            *free_h.entry(t.as_str()).or_default() += 1;
        }
    }
    for (j, t) in reference.iter().enumerate() {
        if ref_free[j] {
            *free_r.entry(t.as_str()).or_default() += 1;
        }
    }
    let skips_left = free_h
        .iter()
        .map(|(t, &c)| (*t, c - c.min(free_r.get(t).copied().unwrap_or(0))))
        .collect();
    let mut positions: std::collections::HashMap<&str, Vec<usize>> = Default::default();
    for (j, t) in reference.iter().enumerate() {
        positions.entry(t.as_str()).or_default().push(j);
    }
    let mut search = StageSearch {
        hyp,
        fixed,
        hyp_free,
        positions,
        ref_used: ref_free.iter().map(|f| !f).collect(),
        skips_left,
        current: Vec::new(),
        best: Some((greedy_chunks, new.clone())),
        nodes: 0,
    };
    search.run(0, None, 0);
    let chosen = search.best.map(|(_, p)| p).unwrap_or(new);
    pairs.truncate(before);
    for &(i, j) in &chosen {
        hyp_free[i] = false;
        ref_free[j] = false;
        pairs.push((i, j));
    }
}

/// Exact matching first, then Snowball stem matching (English only).
pub fn align(hyp: &TokenSequence, reference: &TokenSequence) -> Alignment {
    let mut hyp_free = vec![true; hyp.len()];
    let mut ref_free = vec![true; reference.len()];
    let mut pairs = Vec::new();
    match_stage(&hyp.tokens, &reference.tokens, &mut hyp_free, &mut ref_free, &mut pairs);
    if hyp.language == Language::En && reference.language == Language::En {
        let stemmer = Stemmer::create(Algorithm::English);
        let stem = |t: &[String]| -> Vec<String> { t.iter().map(|w| stemmer.stem(w).into_owned()).collect() };
        let (hs, rs) = (stem(&hyp.tokens), stem(&reference.tokens));
        match_stage(&hs, &rs, &mut hyp_free, &mut ref_free, &mut pairs);
    }
    pairs.sort_unstable();
    let chunks = count_chunks(&pairs);
    Alignment { pairs, chunks }
}

/// METEOR with the classic parameters: recall-weighted harmonic mean
/// `10PR / (R + 9P)` and fragmentation penalty `0.5 (chunks/matches)^3`.
pub fn meteor(hyp: &TokenSequence, reference: &TokenSequence) -> f64 {
    let a = align(hyp, reference);
    let m = a.matches();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (a.chunks as f64 / m as f64).powi(3);
    fmean * (1.0 - penalty)
}

//! Text-overlap metrics over token sequences and their corpus aggregation.

mod bertscore;
mod bleu;
mod meteor;
mod rouge;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bertscore::{
    bertscore_f1, EmbedRequest, EmbedResponse, EmbeddingError, EmbeddingProvider, HashingProvider,
    RemoteProvider,
};
pub use bleu::{bleu, bleu_stats, corpus_bleu, BleuStats};
pub use meteor::{align, meteor, Alignment};
pub use rouge::rouge_l;

pub(crate) use bertscore::fnv1a;

use crate::parser::TokenSequence;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("BLEU order must be in 1..=4, got {0}")]
    InvalidOrder(usize),
    #[error("hypothesis has no tokens")]
    EmptyHypothesis,
    #[error("relative change from a zero baseline")]
    ZeroBaseline,
    #[error("no pairs to score")]
    EmptyCorpus,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricScope {
    PerCase,
    Corpus,
}

/// Metric values for one case or a whole corpus.
///
/// `bleu[k]` uses n-gram orders 1..=k+1. The entity fields are filled in
/// when impressions were scored against the lexicon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scope: MetricScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
    pub bleu: [f64; 4],
    pub rouge_l: f64,
    pub meteor: f64,
    pub bertscore_f1: Option<f64>,
    pub n_cases: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_recall: Option<f64>,
}

/// Percent change from `base` to `new`.
pub fn relative_change(base: f64, new: f64) -> Result<f64, MetricError> {
    if base == 0.0 {
        return Err(MetricError::ZeroBaseline);
    }
    Ok(100.0 * (new - base) / base)
}

/// One hypothesis/reference pair to score.
#[derive(Debug, Clone)]
pub struct ScoredPair {
    pub case_id: String,
    pub hyp: TokenSequence,
    pub reference: TokenSequence,
}

/// Per-case reports plus the corpus report.
///
/// Corpus BLEU pools clipped counts across cases; ROUGE-L, METEOR and
/// BERTScore are macro-averaged over the per-case values.
pub fn evaluate(
    pairs: &[ScoredPair],
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<(Vec<MetricReport>, MetricReport), MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut per_case = Vec::with_capacity(pairs.len());
    let mut pooled = BleuStats::default();
    for p in pairs {
        let stats = bleu_stats(&p.hyp, std::slice::from_ref(&p.reference));
        pooled.add(&stats);
        let mut b = [0.0; 4];
        for (k, slot) in b.iter_mut().enumerate() {
            *slot = stats.score(k + 1, false)?;
        }
        let bert = match provider {
            Some(pr) => Some(bertscore_f1(&p.hyp, &p.reference, pr)?),
            None => None,
        };
        per_case.push(MetricReport {
            scope: MetricScope::PerCase,
            case_id: Some(p.case_id.clone()),
            bleu: b,
            rouge_l: rouge_l(&p.hyp, &p.reference),
            meteor: meteor(&p.hyp, &p.reference),
            bertscore_f1: bert,
            n_cases: 1,
            entity_accuracy: None,
            entity_recall: None,
        });
    }
    let n = per_case.len() as f64;
    let mean = |f: &dyn Fn(&MetricReport) -> f64| per_case.iter().map(f).sum::<f64>() / n;
    let mut corpus_bleu = [0.0; 4];
    for (k, slot) in corpus_bleu.iter_mut().enumerate() {
        *slot = pooled.score(k + 1, false)?;
    }
    let corpus = MetricReport {
        scope: MetricScope::Corpus,
        case_id: None,
        bleu: corpus_bleu,
        rouge_l: mean(&|r| r.rouge_l),
        meteor: mean(&|r| r.meteor),
        bertscore_f1: provider.map(|_| mean(&|r| r.bertscore_f1.unwrap_or(0.0))),
        n_cases: per_case.len(),
        entity_accuracy: None,
        entity_recall: None,
    };
    Ok((per_case, corpus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Language;
    use crate::parser::tokenize;

    #[test]
    fn relative_change_examples() {
        assert!((relative_change(0.07, 0.16).unwrap() - 900.0 / 7.0).abs() < 1e-9);
        assert!((relative_change(0.28, 0.3612).unwrap() - 29.0).abs() < 1e-9);
        assert_eq!(relative_change(0.4, 0.4).unwrap(), 0.0);
        assert_eq!(relative_change(0.0, 0.3), Err(MetricError::ZeroBaseline));
    }

    fn pair(id: &str, h: &str, r: &str) -> ScoredPair {
        ScoredPair {
            case_id: id.into(),
            hyp: tokenize(h, Language::En),
            reference: tokenize(r, Language::En),
        }
    }

    #[test]
    fn self_comparison_corpus() {
        let pairs = vec![
            pair("c1", "impacted teeth 18 and 28 noted", "impacted teeth 18 and 28 noted"),
            pair("c2", "bilateral maxillary sinusitis is seen", "bilateral maxillary sinusitis is seen"),
        ];
        let provider = HashingProvider::default();
        let (cases, corpus) = evaluate(&pairs, Some(&provider)).unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(corpus.bleu, [1.0; 4]);
        assert_eq!(corpus.rouge_l, 1.0);
        assert!((corpus.bertscore_f1.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(corpus.n_cases, 2);
    }

    #[test]
    fn corpus_bleu_pools_counts() {
        let pairs = vec![pair("a", "a b c d", "a b c d"), pair("b", "x y", "p q")];
        let (cases, corpus) = evaluate(&pairs, None).unwrap();
        assert_eq!(cases[1].bleu[0], 0.0);
        // 4 of 6 unigrams match, no brevity penalty
        assert!((corpus.bleu[0] - 4.0 / 6.0).abs() < 1e-12);
        assert!(corpus.bertscore_f1.is_none());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert_eq!(evaluate(&[], None).unwrap_err(), MetricError::EmptyCorpus);
    }
}

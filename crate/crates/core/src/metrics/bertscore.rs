//! Greedy-matching BERTScore over pluggable token embeddings.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MetricError;
use crate::model::Language;
use crate::parser::TokenSequence;

const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("embedding provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider returned {got} vectors for {expected} tokens")]
    CountMismatch { expected: usize, got: usize },
    #[error("provider returned a vector of dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("provider returned a vector with norm {0}, expected unit norm")]
    NotUnitNorm(f64),
}

/// Maps each token of a sequence to a unit-norm vector of fixed dimension.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, tokens: &TokenSequence) -> Result<Vec<Vec<f64>>, EmbeddingError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, tokens: &TokenSequence) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        (**self).embed(tokens)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, tokens: &TokenSequence) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        (**self).embed(tokens)
    }
}

pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic offline fallback: feature-hashed character bigrams and
/// trigrams of the boundary-padded token plus a whole-token feature.
///
/// All components are non-negative, so cosine similarities lie in [0, 1];
/// identical tokens map to identical vectors.
#[derive(Debug, Clone)]
pub struct HashingProvider {
    dim: usize,
    seed: u64,
}

impl HashingProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    fn vector(&self, token: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let padded: Vec<char> = std::iter::once('<')
            .chain(token.chars())
            .chain(std::iter::once('>'))
            .collect();
        for n in 2..=3 {
            for w in padded.windows(n) {
                let gram: String = w.iter().collect();
                v[(fnv1a(self.seed, gram.as_bytes()) % self.dim as u64) as usize] += 1.0;
            }
        }
        let whole = fnv1a(self.seed ^ 0x5151, token.as_bytes());
        v[(whole % self.dim as u64) as usize] += 2.0;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

impl Default for HashingProvider {
    fn default() -> Self {
        Self::new(256, 0)
    }
}

impl EmbeddingProvider for HashingProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &TokenSequence) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Ok(tokens.tokens.iter().map(|t| self.vector(t)).collect())
    }
}

#[derive(Debug, Serialize)]
pub struct EmbedRequest<'a> {
    pub language: Language,
    pub tokens: &'a [String],
}

#[derive(Debug, Deserialize, Serialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

/// Client for a remote embedding service speaking
/// `POST {base}/embed {language, tokens} -> {vectors}`.
///
/// Clones share one connection pool; each call is an independent request.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    agent: ureq::Agent,
    endpoint: String,
    dim: usize,
    retries: u32,
}

impl RemoteProvider {
    pub fn new(base_url: &str, dim: usize, timeout: Duration, retries: u32) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        Self {
            agent: config.into(),
            endpoint: format!("{}/embed", base_url.trim_end_matches('/')),
            dim,
            retries,
        }
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &TokenSequence) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let request = EmbedRequest {
            language: tokens.language,
            tokens: &tokens.tokens,
        };
        let mut last_err = String::new();
        for _ in 0..=self.retries {
            match self.agent.post(&self.endpoint).send_json(&request) {
                Ok(mut resp) => match resp.body_mut().read_json::<EmbedResponse>() {
                    Ok(body) => return Ok(body.vectors),
                    Err(e) => last_err = format!("malformed response: {e}"),
                },
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(EmbeddingError::Unavailable(last_err))
    }
}

fn checked_embed<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    tokens: &TokenSequence,
) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    let vectors = provider.embed(tokens)?;
    if vectors.len() != tokens.len() {
        return Err(EmbeddingError::CountMismatch {
            expected: tokens.len(),
            got: vectors.len(),
        });
    }
    for v in &vectors {
        if v.len() != provider.dim() {
            return Err(EmbeddingError::DimensionMismatch {
                expected: provider.dim(),
                got: v.len(),
            });
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(EmbeddingError::NotUnitNorm(norm));
        }
    }
    Ok(vectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw BERTScore F1: each token is matched to its most similar counterpart,
/// recall averages over reference tokens, precision over hypothesis tokens.
/// No idf weighting and no baseline rescaling.
pub fn bertscore_f1<P: EmbeddingProvider + ?Sized>(
    hyp: &TokenSequence,
    reference: &TokenSequence,
    provider: &P,
) -> Result<f64, MetricError> {
    if hyp.is_empty() || reference.is_empty() {
        return Ok(0.0);
    }
    let h = checked_embed(provider, hyp)?;
    let r = checked_embed(provider, reference)?;
    let best = |from: &[Vec<f64>], to: &[Vec<f64>]| -> f64 {
        from.iter()
            .map(|a| to.iter().map(|b| dot(a, b)).fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / from.len() as f64
    };
    let recall = best(&r, &h);
    let precision = best(&h, &r);
    if precision + recall <= 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * precision * recall / (precision + recall)).clamp(0.0, 1.0))
}

//! Entity-level scoring of impressions against reference entity sets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosisError {
    #[error("no cases to score")]
    EmptyCorpus,
}

/// How case-level "accuracy" is read from the confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyMode {
    /// tp / (tp + fp + fn)
    #[default]
    Jaccard,
    /// tp / (tp + fp)
    Precision,
}

impl std::str::FromStr for AccuracyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jaccard" => Ok(Self::Jaccard),
            "precision" => Ok(Self::Precision),
            other => Err(format!("unknown accuracy mode {other:?} (expected jaccard|precision)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub recall: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn score_case(pred: &BTreeSet<String>, reference: &BTreeSet<String>) -> EntityScore {
    score_case_with(pred, reference, AccuracyMode::Jaccard)
}

pub fn score_case_with(
    pred: &BTreeSet<String>,
    reference: &BTreeSet<String>,
    mode: AccuracyMode,
) -> EntityScore {
    let tp = pred.intersection(reference).count();
    let fp = pred.len() - tp;
    let fn_ = reference.len() - tp;
    let accuracy = match mode {
        AccuracyMode::Jaccard => ratio(tp, tp + fp + fn_),
        AccuracyMode::Precision => ratio(tp, tp + fp),
    };
    EntityScore {
        tp,
        fp,
        fn_,
        accuracy,
        recall: ratio(tp, tp + fn_),
    }
}

/// Share of the cases whose reference contains `entity` in which the
/// prediction also contains it. `None` when no reference mentions it.
pub fn per_entity_detection(
    cases: &[(BTreeSet<String>, BTreeSet<String>)],
    entity: &str,
) -> Option<f64> {
    let mut present = 0usize;
    let mut hit = 0usize;
    for (pred, reference) in cases {
        if reference.contains(entity) {
            present += 1;
            if pred.contains(entity) {
                hit += 1;
            }
        }
    }
    (present > 0).then(|| hit as f64 / present as f64)
}

/// Micro-averaged recall Σtp / Σ(tp + fn); 1 when no reference has entities.
pub fn corpus_recall(cases: &[(BTreeSet<String>, BTreeSet<String>)]) -> Result<f64, DiagnosisError> {
    if cases.is_empty() {
        return Err(DiagnosisError::EmptyCorpus);
    }
    let (tp, total) = cases.iter().fold((0, 0), |(tp, total), (pred, reference)| {
        (tp + pred.intersection(reference).count(), total + reference.len())
    });
    Ok(ratio(tp, total))
}

/// Mean case-level accuracy under `mode`.
pub fn mean_accuracy(
    cases: &[(BTreeSet<String>, BTreeSet<String>)],
    mode: AccuracyMode,
) -> Result<f64, DiagnosisError> {
    if cases.is_empty() {
        return Err(DiagnosisError::EmptyCorpus);
    }
    let sum: f64 = cases.iter().map(|(p, r)| score_case_with(p, r, mode).accuracy).sum();
    Ok(sum / cases.len() as f64)
}

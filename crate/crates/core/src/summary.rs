//! One-shot aggregation of a set of annotations: rank distributions per
//! rater cohort, rubric means and deltas, error burdens and rank tests.
//! Output depends only on the input order-insensitive content.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::human_eval::{
    burden_delta, collaboration_pairs, delta_scores, error_burden, quality_means, quality_samples, rank_distribution,
    Annotation, BurdenDelta, BurdenRow, HumanEvalError, QualityDelta, QualityDim, QualityRow, RankDistribution,
};
use crate::model::{CaseRecord, RaterRole};
use crate::stats::{kruskal_wallis, StatResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRanks {
    pub role: RaterRole,
    pub distribution: RankDistribution,
}

/// Kruskal-Wallis across arms on one rubric dimension within one cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityTest {
    pub role: RaterRole,
    pub dimension: QualityDim,
    pub result: StatResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scale: u8,
    pub n_annotations: usize,
    pub ranks: Vec<CohortRanks>,
    pub quality: Vec<QualityRow>,
    pub quality_deltas: Vec<QualityDelta>,
    /// Radiologist annotations only.
    pub error_burden: Vec<BurdenRow>,
    pub burden_deltas: Vec<BurdenDelta>,
    pub quality_tests: Vec<QualityTest>,
}

/// Annotation order does not matter: everything is grouped through ordered
/// maps before any floating-point sum.
pub fn summarize(annotations: &[Annotation], cases: &[CaseRecord], scale: u8) -> Result<Summary, HumanEvalError> {
    let mut sorted: Vec<&Annotation> = annotations.iter().collect();
    sorted.sort_by(|a, b| (&a.case_id, a.arm, &a.rater_id).cmp(&(&b.case_id, b.arm, &b.rater_id)));
    let annotations: Vec<Annotation> = sorted.into_iter().cloned().collect();

    let mut by_role: BTreeMap<RaterRole, Vec<Annotation>> = BTreeMap::new();
    for a in &annotations {
        a.check(scale)?;
        by_role.entry(a.role).or_default().push(a.clone());
    }
    let mut ranks = Vec::new();
    let mut quality_tests = Vec::new();
    for (role, anns) in &by_role {
        ranks.push(CohortRanks { role: *role, distribution: rank_distribution(anns, scale)? });
        for dimension in QualityDim::ALL {
            let groups: Vec<Vec<f64>> = quality_samples(anns, dimension, None).into_values().collect();
            if let Ok(result) = kruskal_wallis(&groups) {
                quality_tests.push(QualityTest { role: *role, dimension, result });
            }
        }
    }

    let quality = quality_means(&annotations)?;
    let (collab_q, manual_q) = collaboration_pairs(&quality);
    let quality_deltas = delta_scores(&collab_q, &manual_q)?;

    let radiologist = by_role.get(&RaterRole::Radiologist).map(Vec::as_slice).unwrap_or(&[]);
    let error_burden = error_burden(radiologist, cases)?;
    let collab_b: Vec<BurdenRow> = error_burden.iter().filter(|r| r.arm.is_collaboration()).cloned().collect();
    let partners: std::collections::BTreeSet<_> = collab_b
        .iter()
        .filter_map(|r| r.arm.manual_counterpart().map(|m| (m, r.department)))
        .collect();
    let manual_b: Vec<BurdenRow> = error_burden
        .iter()
        .filter(|r| partners.contains(&(r.arm, r.department)))
        .cloned()
        .collect();
    let burden_deltas = burden_delta(&collab_b, &manual_b)?;

    Ok(Summary {
        scale,
        n_annotations: annotations.len(),
        ranks,
        quality,
        quality_deltas,
        error_burden,
        burden_deltas,
        quality_tests,
    })
}

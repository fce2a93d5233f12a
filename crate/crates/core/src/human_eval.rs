//! Human-evaluation records and their aggregates: preference ranks,
//! quality rubric means, and omission/incorrection burden.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Arm, CaseRecord, Department, RaterRole};
use crate::parser::Section;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HumanEvalError {
    #[error("ranking {ranking} of case {case_id} exceeds scale {scale}")]
    ScaleMismatch { case_id: String, ranking: u8, scale: u8 },
    #[error("{field} = {value} is outside 1..=4")]
    ScoreOutOfRange { field: &'static str, value: u8 },
    #[error("no annotations in group {0}")]
    EmptyGroup(String),
    #[error("group keys differ: {0}")]
    KeyMismatch(String),
    #[error("annotation refers to unknown case {0}")]
    UnknownCase(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityDim {
    FactualConsistency,
    Coherence,
    MedicalSafety,
    ClinicalUse,
}

impl QualityDim {
    pub const ALL: [QualityDim; 4] = [
        QualityDim::FactualConsistency,
        QualityDim::Coherence,
        QualityDim::MedicalSafety,
        QualityDim::ClinicalUse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QualityDim::FactualConsistency => "factual_consistency",
            QualityDim::Coherence => "coherence",
            QualityDim::MedicalSafety => "medical_safety",
            QualityDim::ClinicalUse => "clinical_use",
        }
    }
}

impl std::str::FromStr for QualityDim {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QualityDim::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown quality dimension {s:?}"))
    }
}

/// Rubric scores on the 1 (best) to 4 (worst) scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityScores {
    pub factual_consistency: u8,
    pub coherence: u8,
    pub medical_safety: u8,
    pub clinical_use: u8,
}

impl QualityScores {
    pub fn uniform(v: u8) -> Self {
        Self {
            factual_consistency: v,
            coherence: v,
            medical_safety: v,
            clinical_use: v,
        }
    }

    pub fn get(&self, dim: QualityDim) -> u8 {
        match dim {
            QualityDim::FactualConsistency => self.factual_consistency,
            QualityDim::Coherence => self.coherence,
            QualityDim::MedicalSafety => self.medical_safety,
            QualityDim::ClinicalUse => self.clinical_use,
        }
    }

    pub fn check(&self) -> Result<(), HumanEvalError> {
        for dim in QualityDim::ALL {
            let value = self.get(dim);
            if !(1..=4).contains(&value) {
                return Err(HumanEvalError::ScoreOutOfRange { field: dim.as_str(), value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Omission,
    Incorrection,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 2] = [ErrorKind::Omission, ErrorKind::Incorrection];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Omission => "omission",
            ErrorKind::Incorrection => "incorrection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorItem {
    pub section: Section,
    pub kind: ErrorKind,
    pub clinically_significant: bool,
}

/// One rater's verdict on one arm's report for one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub rater_id: String,
    pub role: RaterRole,
    pub case_id: String,
    pub arm: Arm,
    pub ranking: u8,
    pub quality: QualityScores,
    #[serde(default)]
    pub errors: Vec<ErrorItem>,
}

impl Annotation {
    pub fn check(&self, scale: u8) -> Result<(), HumanEvalError> {
        if self.ranking == 0 || self.ranking > scale {
            return Err(HumanEvalError::ScaleMismatch {
                case_id: self.case_id.clone(),
                ranking: self.ranking,
                scale,
            });
        }
        self.quality.check()
    }

    pub fn error_count(&self, section: Section, kind: ErrorKind) -> usize {
        self.errors.iter().filter(|e| e.section == section && e.kind == kind).count()
    }

    pub fn significant_count(&self, section: Section, kind: ErrorKind) -> usize {
        self.errors
            .iter()
            .filter(|e| e.section == section && e.kind == kind && e.clinically_significant)
            .count()
    }
}

// ---- preference ranks ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRanks {
    pub arm: Arm,
    pub n: u64,
    /// counts[r - 1] = number of times rank r was assigned.
    pub counts: Vec<u64>,
    pub proportions: Vec<f64>,
}

impl ArmRanks {
    pub fn from_counts(arm: Arm, counts: Vec<u64>) -> Self {
        let n: u64 = counts.iter().sum();
        let proportions = counts
            .iter()
            .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect();
        Self { arm, n, counts, proportions }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDistribution {
    pub scale: u8,
    /// One entry per arm seen, in arm order.
    pub arms: Vec<ArmRanks>,
}

impl RankDistribution {
    pub fn arm(&self, arm: Arm) -> Option<&ArmRanks> {
        self.arms.iter().find(|a| a.arm == arm)
    }
}

pub fn rank_distribution(annotations: &[Annotation], scale: u8) -> Result<RankDistribution, HumanEvalError> {
    let mut counts: BTreeMap<Arm, Vec<u64>> = BTreeMap::new();
    for a in annotations {
        if a.ranking == 0 || a.ranking > scale {
            return Err(HumanEvalError::ScaleMismatch {
                case_id: a.case_id.clone(),
                ranking: a.ranking,
                scale,
            });
        }
        counts.entry(a.arm).or_insert_with(|| vec![0; scale as usize])[a.ranking as usize - 1] += 1;
    }
    Ok(RankDistribution {
        scale,
        arms: counts.into_iter().map(|(arm, c)| ArmRanks::from_counts(arm, c)).collect(),
    })
}

// ---- quality means ----

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMeans {
    pub factual_consistency: f64,
    pub coherence: f64,
    pub medical_safety: f64,
    pub clinical_use: f64,
}

impl QualityMeans {
    pub fn get(&self, dim: QualityDim) -> f64 {
        match dim {
            QualityDim::FactualConsistency => self.factual_consistency,
            QualityDim::Coherence => self.coherence,
            QualityDim::MedicalSafety => self.medical_safety,
            QualityDim::ClinicalUse => self.clinical_use,
        }
    }

    fn from_fn(f: impl Fn(QualityDim) -> f64) -> Self {
        Self {
            factual_consistency: f(QualityDim::FactualConsistency),
            coherence: f(QualityDim::Coherence),
            medical_safety: f(QualityDim::MedicalSafety),
            clinical_use: f(QualityDim::ClinicalUse),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub arm: Arm,
    pub role: RaterRole,
    pub n: usize,
    pub means: QualityMeans,
}

/// Mean rubric score per dimension for every (arm, role) group present.
pub fn quality_means(annotations: &[Annotation]) -> Result<Vec<QualityRow>, HumanEvalError> {
    let mut sums: BTreeMap<(Arm, RaterRole), ([u64; 4], usize)> = BTreeMap::new();
    for a in annotations {
        a.quality.check()?;
        let slot = sums.entry((a.arm, a.role)).or_default();
        for (k, dim) in QualityDim::ALL.into_iter().enumerate() {
            slot.0[k] += a.quality.get(dim) as u64;
        }
        slot.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|((arm, role), (s, n))| QualityRow {
            arm,
            role,
            n,
            means: QualityMeans::from_fn(|d| {
                let k = QualityDim::ALL.iter().position(|x| *x == d).unwrap();
                s[k] as f64 / n as f64
            }),
        })
        .collect())
}

/// Means for one group; `EmptyGroup` when no annotation falls in it.
pub fn quality_means_for(
    annotations: &[Annotation],
    arm: Arm,
    role: RaterRole,
) -> Result<QualityMeans, HumanEvalError> {
    quality_means(annotations)?
        .into_iter()
        .find(|r| r.arm == arm && r.role == role)
        .map(|r| r.means)
        .ok_or_else(|| HumanEvalError::EmptyGroup(format!("{}/{}", arm.tag(), role.as_str())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityDelta {
    /// The manual tier the pair is keyed on.
    pub arm: Arm,
    pub role: RaterRole,
    pub delta: QualityMeans,
}

/// Collaboration arms pair with their manual tier; other arms pair with
/// themselves, so comparing a table with itself yields zeros.
fn pairing_key(arm: Arm) -> Arm {
    arm.manual_counterpart().unwrap_or(arm)
}

fn key_mismatch<K: std::fmt::Debug + Ord>(a: &BTreeSet<K>, b: &BTreeSet<K>) -> HumanEvalError {
    let only_a: Vec<_> = a.difference(b).collect();
    let only_b: Vec<_> = b.difference(a).collect();
    HumanEvalError::KeyMismatch(format!("only in first: {only_a:?}; only in second: {only_b:?}"))
}

/// Δ = collaboration mean − manual mean per dimension; negative is better.
pub fn delta_scores(collab: &[QualityRow], manual: &[QualityRow]) -> Result<Vec<QualityDelta>, HumanEvalError> {
    let index = |rows: &[QualityRow]| -> BTreeMap<(Arm, RaterRole), QualityMeans> {
        rows.iter().map(|r| ((pairing_key(r.arm), r.role), r.means)).collect()
    };
    let (c, m) = (index(collab), index(manual));
    let (kc, km): (BTreeSet<_>, BTreeSet<_>) = (c.keys().copied().collect(), m.keys().copied().collect());
    if kc != km {
        return Err(key_mismatch(&kc, &km));
    }
    Ok(c.iter()
        .map(|(&(arm, role), cm)| {
            let mm = &m[&(arm, role)];
            QualityDelta {
                arm,
                role,
                delta: QualityMeans::from_fn(|d| cm.get(d) - mm.get(d)),
            }
        })
        .collect())
}

/// Splits rows into (collaboration rows, manual rows whose collaboration
/// partner is present), ready for `delta_scores`.
pub fn collaboration_pairs(rows: &[QualityRow]) -> (Vec<QualityRow>, Vec<QualityRow>) {
    let collab: Vec<QualityRow> = rows.iter().filter(|r| r.arm.is_collaboration()).cloned().collect();
    let keys: BTreeSet<(Arm, RaterRole)> = collab.iter().map(|r| (pairing_key(r.arm), r.role)).collect();
    let manual = rows
        .iter()
        .filter(|r| !r.arm.is_collaboration() && keys.contains(&(r.arm, r.role)))
        .cloned()
        .collect();
    (collab, manual)
}

// ---- error burden ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurdenRow {
    pub arm: Arm,
    pub department: Department,
    pub section: Section,
    pub kind: ErrorKind,
    /// Annotated case instances in the (arm, department) group.
    pub n_cases: usize,
    pub mean_count: f64,
    /// Mean per case of clinically significant items.
    pub cs_proportion: f64,
}

fn department_index(cases: &[CaseRecord]) -> HashMap<&str, Department> {
    cases.iter().map(|c| (c.case_id.as_str(), c.department)).collect()
}

/// Mean error count and mean clinically-significant count per case, for
/// every (arm, department) present and every (section, kind).
pub fn error_burden(annotations: &[Annotation], cases: &[CaseRecord]) -> Result<Vec<BurdenRow>, HumanEvalError> {
    let depts = department_index(cases);
    type Acc = (usize, BTreeMap<(Section, ErrorKind), (usize, usize)>);
    let mut groups: BTreeMap<(Arm, Department), Acc> = BTreeMap::new();
    for a in annotations {
        let dept = *depts
            .get(a.case_id.as_str())
            .ok_or_else(|| HumanEvalError::UnknownCase(a.case_id.clone()))?;
        let acc = groups.entry((a.arm, dept)).or_default();
        acc.0 += 1;
        for e in &a.errors {
            let slot = acc.1.entry((e.section, e.kind)).or_default();
            slot.0 += 1;
            slot.1 += e.clinically_significant as usize;
        }
    }
    let mut rows = Vec::new();
    for ((arm, department), (n, tallies)) in groups {
        for section in Section::ALL {
            for kind in ErrorKind::ALL {
                let (count, cs) = tallies.get(&(section, kind)).copied().unwrap_or_default();
                rows.push(BurdenRow {
                    arm,
                    department,
                    section,
                    kind,
                    n_cases: n,
                    mean_count: count as f64 / n as f64,
                    cs_proportion: cs as f64 / n as f64,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurdenDelta {
    pub arm: Arm,
    pub department: Department,
    pub section: Section,
    pub kind: ErrorKind,
    pub mean_count: f64,
    pub cs_proportion: f64,
}

type BurdenKey = (Arm, Department, Section, ErrorKind);

/// Element-wise collaboration − manual over matching burden rows.
pub fn burden_delta(collab: &[BurdenRow], manual: &[BurdenRow]) -> Result<Vec<BurdenDelta>, HumanEvalError> {
    let index = |rows: &[BurdenRow]| -> BTreeMap<BurdenKey, (f64, f64)> {
        rows.iter()
            .map(|r| ((pairing_key(r.arm), r.department, r.section, r.kind), (r.mean_count, r.cs_proportion)))
            .collect()
    };
    let (c, m) = (index(collab), index(manual));
    let (kc, km): (BTreeSet<_>, BTreeSet<_>) = (c.keys().copied().collect(), m.keys().copied().collect());
    if kc != km {
        return Err(key_mismatch(&kc, &km));
    }
    Ok(c.iter()
        .map(|(&(arm, department, section, kind), &(cc, ccs))| {
            let (mc, mcs) = m[&(arm, department, section, kind)];
            BurdenDelta {
                arm,
                department,
                section,
                kind,
                mean_count: cc - mc,
                cs_proportion: ccs - mcs,
            }
        })
        .collect())
}

/// Which per-case quantity a burden sample carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurdenOutcome {
    Count,
    ClinicalSignificance,
}

/// Per-annotation values of one burden outcome grouped by arm, optionally
/// restricted to one department; the input for rank tests across arms.
pub fn burden_samples(
    annotations: &[Annotation],
    cases: &[CaseRecord],
    department: Option<Department>,
    section: Section,
    kind: ErrorKind,
    outcome: BurdenOutcome,
) -> Result<BTreeMap<Arm, Vec<f64>>, HumanEvalError> {
    let depts = department_index(cases);
    let mut out: BTreeMap<Arm, Vec<f64>> = BTreeMap::new();
    for a in annotations {
        let d = *depts
            .get(a.case_id.as_str())
            .ok_or_else(|| HumanEvalError::UnknownCase(a.case_id.clone()))?;
        if department.is_some_and(|want| want != d) {
            continue;
        }
        let v = match outcome {
            BurdenOutcome::Count => a.error_count(section, kind),
            BurdenOutcome::ClinicalSignificance => a.significant_count(section, kind),
        };
        out.entry(a.arm).or_default().push(v as f64);
    }
    Ok(out)
}

/// Per-annotation scores on one rubric dimension grouped by arm.
pub fn quality_samples(annotations: &[Annotation], dim: QualityDim, role: Option<RaterRole>) -> BTreeMap<Arm, Vec<f64>> {
    let mut out: BTreeMap<Arm, Vec<f64>> = BTreeMap::new();
    for a in annotations.iter().filter(|a| role.is_none_or(|r| r == a.role)) {
        out.entry(a.arm).or_default().push(a.quality.get(dim) as f64);
    }
    out
}

//! Shared domain types and study validation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Zh,
    En,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::Zh, Language::En];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Zh => "zh",
            Language::En => "en",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zh" => Ok(Language::Zh),
            "en" => Ok(Language::En),
            _ => Err(ParseEnumError::new("language", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{value}`")]
pub struct ParseEnumError {
    pub kind: &'static str,
    pub value: String,
}

impl ParseEnumError {
    pub(crate) fn new(kind: &'static str, value: &str) -> Self {
        Self {
            kind,
            value: value.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

/// Ordering department of a case; doubles as the subspecialty stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Department {
    #[serde(rename = "OMFS")]
    Omfs,
    Endo,
    Ortho,
    PerioImplantProstho,
}

impl Department {
    pub const ALL: [Department; 4] = [
        Department::Omfs,
        Department::Endo,
        Department::Ortho,
        Department::PerioImplantProstho,
    ];

    /// Stable serialized tag.
    pub fn as_str(self) -> &'static str {
        match self {
            Department::Omfs => "OMFS",
            Department::Endo => "Endo",
            Department::Ortho => "Ortho",
            Department::PerioImplantProstho => "PerioImplantProstho",
        }
    }

    /// Short row label used in the subspecialty tables.
    pub fn table_label(self) -> &'static str {
        match self {
            Department::PerioImplantProstho => "Perio",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for Department {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Department {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OMFS" | "omfs" => Ok(Department::Omfs),
            "Endo" | "endo" => Ok(Department::Endo),
            "Ortho" | "ortho" => Ok(Department::Ortho),
            "PerioImplantProstho" | "Perio" | "perio" => Ok(Department::PerioImplantProstho),
            _ => Err(ParseEnumError::new("department", s)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fov {
    Large,
    Moderate,
    Small,
}

impl Fov {
    pub const ALL: [Fov; 3] = [Fov::Large, Fov::Moderate, Fov::Small];
}

/// One report source in a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    GroundTruth,
    #[serde(rename = "AI")]
    Ai,
    Novice,
    Intermediate,
    Senior,
    CoNovice,
    CoIntermediate,
    CoSenior,
}

impl Arm {
    pub const ALL: [Arm; 8] = [
        Arm::GroundTruth,
        Arm::Ai,
        Arm::Novice,
        Arm::Intermediate,
        Arm::Senior,
        Arm::CoNovice,
        Arm::CoIntermediate,
        Arm::CoSenior,
    ];

    /// Arms ranked on the 1–4 scale.
    pub const AI_VERSUS_MANUAL: [Arm; 4] = [Arm::Ai, Arm::Novice, Arm::Intermediate, Arm::Senior];

    /// Arms ranked on the 1–6 scale, in table column order.
    pub const MANUAL_AND_COLLABORATION: [Arm; 6] = [
        Arm::Novice,
        Arm::CoNovice,
        Arm::Intermediate,
        Arm::CoIntermediate,
        Arm::Senior,
        Arm::CoSenior,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Arm::GroundTruth => "GroundTruth",
            Arm::Ai => "AI",
            Arm::Novice => "Novice",
            Arm::Intermediate => "Intermediate",
            Arm::Senior => "Senior",
            Arm::CoNovice => "CoNovice",
            Arm::CoIntermediate => "CoIntermediate",
            Arm::CoSenior => "CoSenior",
        }
    }

    /// Human-facing label as printed in tables ("Co-Novice").
    pub fn label(self) -> &'static str {
        match self {
            Arm::GroundTruth => "Ground truth",
            Arm::CoNovice => "Co-Novice",
            Arm::CoIntermediate => "Co-Intermediate",
            Arm::CoSenior => "Co-Senior",
            other => other.tag(),
        }
    }

    pub fn is_collaboration(self) -> bool {
        matches!(self, Arm::CoNovice | Arm::CoIntermediate | Arm::CoSenior)
    }

    /// The manual tier a collaboration arm is paired with.
    pub fn manual_counterpart(self) -> Option<Arm> {
        match self {
            Arm::CoNovice => Some(Arm::Novice),
            Arm::CoIntermediate => Some(Arm::Intermediate),
            Arm::CoSenior => Some(Arm::Senior),
            _ => None,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Arm {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Arm::ALL
            .into_iter()
            .find(|a| a.tag() == s || a.label() == s)
            .ok_or_else(|| ParseEnumError::new("arm", s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RaterRole {
    Radiologist,
    Clinician,
}

impl RaterRole {
    pub fn as_str(self) -> &'static str {
        match self {
            RaterRole::Radiologist => "radiologist",
            RaterRole::Clinician => "clinician",
        }
    }

    /// Cohort heading used in the ranking tables.
    pub fn cohort_label(self) -> &'static str {
        match self {
            RaterRole::Radiologist => "Radiologists",
            RaterRole::Clinician => "Clinicians",
        }
    }
}

impl FromStr for RaterRole {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "radiologist" => Ok(RaterRole::Radiologist),
            "clinician" => Ok(RaterRole::Clinician),
            _ => Err(ParseEnumError::new("rater role", s)),
        }
    }
}

/// Case metadata. Identifiers are opaque and supplied by the ingester.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub sex: Sex,
    pub age_years: u32,
    pub department: Department,
    pub fov: Fov,
    pub clinical_diagnosis: String,
    pub slice_count: u32,
    pub pixel_spacing_mm: (f64, f64),
}

impl CaseRecord {
    /// Checks the numeric invariants that serde cannot express.
    pub fn check(&self) -> Result<(), String> {
        if self.case_id.is_empty() {
            return Err("empty case_id".into());
        }
        if self.slice_count == 0 {
            return Err(format!("case {}: slice_count must be >= 1", self.case_id));
        }
        let (a, b) = self.pixel_spacing_mm;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(format!(
                "case {}: pixel spacing must be positive, got ({a}, {b})",
                self.case_id
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub report_id: String,
    pub case_id: String,
    pub arm: Arm,
    pub language: Language,
    pub findings: String,
    pub impression: String,
}

impl Report {
    /// Findings and impression joined under their language's section headers.
    pub fn full_text(&self) -> String {
        let (f, i) = crate::parser::section_headers(self.language);
        match self.language {
            Language::En => format!("{f} {}\n{i} {}", self.findings, self.impression),
            Language::Zh => format!("{f}{}\n{i}{}", self.findings, self.impression),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study_id: String,
    pub arms_in_scope: BTreeSet<Arm>,
    pub rank_scale: u8,
    pub rater_roles: BTreeSet<RaterRole>,
    pub blinding_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("rank scale must be 4 or 6, got {0}")]
    BadScale(u8),
    #[error("rank scale {scale} requires exactly {scale} arms, got {arms}")]
    ArmCountMismatch { scale: u8, arms: usize },
    #[error("rank scale {scale} requires arms {expected}")]
    WrongArms { scale: u8, expected: String },
    #[error("study must admit at least one rater role")]
    NoRoles,
    #[error("study id must be non-empty and use only [A-Za-z0-9_-]")]
    BadStudyId,
}

impl StudyConfig {
    /// A 1–4 study ranking AI against the three manual tiers.
    pub fn ai_versus_manual(study_id: impl Into<String>, blinding_seed: u64) -> Self {
        Self {
            study_id: study_id.into(),
            arms_in_scope: Arm::AI_VERSUS_MANUAL.into_iter().collect(),
            rank_scale: 4,
            rater_roles: [RaterRole::Radiologist, RaterRole::Clinician].into_iter().collect(),
            blinding_seed,
        }
    }

    /// A 1–6 study ranking manual against collaboration reports.
    pub fn manual_versus_collaboration(study_id: impl Into<String>, blinding_seed: u64) -> Self {
        Self {
            study_id: study_id.into(),
            arms_in_scope: Arm::MANUAL_AND_COLLABORATION.into_iter().collect(),
            rank_scale: 6,
            rater_roles: [RaterRole::Radiologist, RaterRole::Clinician].into_iter().collect(),
            blinding_seed,
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let id_ok = !self.study_id.is_empty()
            && self
                .study_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !id_ok {
            return Err(ConfigError::BadStudyId);
        }
        let expected: &[Arm] = match self.rank_scale {
            4 => &Arm::AI_VERSUS_MANUAL,
            6 => &Arm::MANUAL_AND_COLLABORATION,
            s => return Err(ConfigError::BadScale(s)),
        };
        if self.arms_in_scope.len() != self.rank_scale as usize {
            return Err(ConfigError::ArmCountMismatch {
                scale: self.rank_scale,
                arms: self.arms_in_scope.len(),
            });
        }
        if !expected.iter().all(|a| self.arms_in_scope.contains(a)) {
            let names: Vec<_> = expected.iter().map(|a| a.tag()).collect();
            return Err(ConfigError::WrongArms {
                scale: self.rank_scale,
                expected: names.join(", "),
            });
        }
        if self.rater_roles.is_empty() {
            return Err(ConfigError::NoRoles);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MissingArm { case_id: String, arm: Arm },
    Duplicate { case_id: String, arm: Arm, language: Language },
    DanglingCase { report_id: String, case_id: String },
    DuplicateCase { case_id: String },
    InvalidCase { case_id: String, reason: String },
    EmptySection { report_id: String },
    InvalidConfig { reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_well_formed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Structural checks over one study. Violations are data, sorted so the
/// result does not depend on input order.
pub fn validate_study(
    config: &StudyConfig,
    reports: &[Report],
    cases: &[CaseRecord],
) -> ValidationReport {
    let mut violations = BTreeSet::new();

    if let Err(e) = config.check() {
        violations.insert(Violation::InvalidConfig {
            reason: e.to_string(),
        });
    }

    let mut case_ids = BTreeSet::new();
    let mut seen = HashSet::new();
    for case in cases {
        if !seen.insert(case.case_id.as_str()) {
            violations.insert(Violation::DuplicateCase {
                case_id: case.case_id.clone(),
            });
        }
        if let Err(reason) = case.check() {
            violations.insert(Violation::InvalidCase {
                case_id: case.case_id.clone(),
                reason,
            });
        }
        case_ids.insert(case.case_id.as_str());
    }

    let mut per_key: BTreeMap<(&str, Arm, Language), usize> = BTreeMap::new();
    let mut arms_per_case: BTreeMap<&str, BTreeSet<Arm>> = BTreeMap::new();
    for r in reports {
        if !case_ids.contains(r.case_id.as_str()) {
            violations.insert(Violation::DanglingCase {
                report_id: r.report_id.clone(),
                case_id: r.case_id.clone(),
            });
        }
        if r.findings.trim().is_empty() || r.impression.trim().is_empty() {
            violations.insert(Violation::EmptySection {
                report_id: r.report_id.clone(),
            });
        }
        *per_key.entry((&r.case_id, r.arm, r.language)).or_default() += 1;
        arms_per_case.entry(&r.case_id).or_default().insert(r.arm);
    }
    for ((case_id, arm, language), n) in per_key {
        if n > 1 {
            violations.insert(Violation::Duplicate {
                case_id: case_id.to_string(),
                arm,
                language,
            });
        }
    }

    let required: BTreeSet<Arm> = config
        .arms_in_scope
        .iter()
        .copied()
        .chain([Arm::GroundTruth])
        .collect();
    let empty = BTreeSet::new();
    for case_id in &case_ids {
        let present = arms_per_case.get(case_id).unwrap_or(&empty);
        for arm in required.difference(present) {
            violations.insert(Violation::MissingArm {
                case_id: case_id.to_string(),
                arm: *arm,
            });
        }
    }

    ValidationReport {
        violations: violations.into_iter().collect(),
    }
}

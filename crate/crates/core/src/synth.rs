//! Deterministic synthetic cohorts: case metadata, templated bilingual
//! ground-truth reports, seeded fault injection with an exact manifest, and
//! annotations derived from those manifests.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::human_eval::{Annotation, ErrorItem, ErrorKind, QualityScores};
use crate::model::{Arm, CaseRecord, Department, Fov, Language, RaterRole, Report, Sex};
use crate::parser::{EntityLexicon, Section};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
    #[error("invalid fault profile: {0}")]
    InvalidProfile(String),
    #[error("unknown entity {0}")]
    UnknownEntity(String),
}

/// Counts for the most frequent impression entities; every other lexicon
/// entry gets [`DEFAULT_TAIL_WEIGHT`].
pub const DEFAULT_ENTITY_COUNTS: [(&str, f64); 6] = [
    ("impacted_tooth", 4896.0),
    ("apical_periodontitis", 4766.0),
    ("malocclusion", 3498.0),
    ("dental_caries", 2248.0),
    ("post_root_canal_treatment", 1938.0),
    ("partial_edentulism", 1928.0),
];

pub const DEFAULT_TAIL_WEIGHT: f64 = 250.0;

const FOV_COUNTS: [(Fov, f64); 3] = [(Fov::Large, 3307.0), (Fov::Moderate, 3132.0), (Fov::Small, 668.0)];
const SEX_COUNTS: [(Sex, f64); 2] = [(Sex::Female, 4008.0), (Sex::Male, 3099.0)];
const SPACING_COUNTS: [(f64, f64); 6] = [
    (0.3, 5522.0),
    (0.25, 525.0),
    (0.2, 77.0),
    (0.16, 30.0),
    (0.15, 565.0),
    (0.125, 388.0),
];
const AGE_MEAN: f64 = 26.9;
const AGE_SD: f64 = 17.1;

fn normalized<K: Ord + Copy>(pairs: &[(K, f64)]) -> BTreeMap<K, f64> {
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.iter().map(|&(k, w)| (k, w / total)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_cases: usize,
    /// canonical_id → sampling weight.
    pub entity_frequency: BTreeMap<String, f64>,
    pub department_mix: BTreeMap<Department, f64>,
    pub fov_mix: BTreeMap<Fov, f64>,
    pub seed: u64,
    #[serde(default = "default_min_entities")]
    pub min_entities: usize,
    #[serde(default = "default_max_entities")]
    pub max_entities: usize,
}

fn default_min_entities() -> usize {
    1
}

fn default_max_entities() -> usize {
    7
}

impl CohortSpec {
    /// Default long-tail weights over `lexicon`, uniform departments and the
    /// reference field-of-view mix.
    pub fn with_defaults(lexicon: &EntityLexicon, n_cases: usize, seed: u64) -> Self {
        let top: BTreeMap<&str, f64> = DEFAULT_ENTITY_COUNTS.into_iter().collect();
        let entity_frequency = lexicon
            .entries()
            .iter()
            .map(|e| {
                let w = top.get(e.canonical_id.as_str()).copied().unwrap_or(DEFAULT_TAIL_WEIGHT);
                (e.canonical_id.clone(), w)
            })
            .collect();
        Self {
            n_cases,
            entity_frequency,
            department_mix: Department::ALL.iter().map(|&d| (d, 0.25)).collect(),
            fov_mix: normalized(&FOV_COUNTS),
            seed,
            min_entities: 1,
            max_entities: 7,
        }
    }

    pub fn check(&self, lexicon: &EntityLexicon) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_cases == 0 {
            return bad("n_cases must be positive".into());
        }
        if self.min_entities == 0 || self.min_entities > self.max_entities {
            return bad(format!("entity count range {}..={} is invalid", self.min_entities, self.max_entities));
        }
        for (id, w) in &self.entity_frequency {
            if !lexicon.contains(id) {
                return Err(SynthError::UnknownEntity(id.clone()));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return bad(format!("weight of {id} must be finite and non-negative"));
            }
        }
        if !self.entity_frequency.values().any(|w| *w > 0.0) {
            return bad("at least one entity weight must be positive".into());
        }
        for (name, sum) in [
            ("department_mix", self.department_mix.values().sum::<f64>()),
            ("fov_mix", self.fov_mix.values().sum::<f64>()),
        ] {
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("{name} sums to {sum}, expected 1"));
            }
        }
        if self.department_mix.values().chain(self.fov_mix.values()).any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("mix proportions must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultProfile {
    /// Chance that an entity's sentence or clause is dropped, per section.
    pub omission_rate: f64,
    /// Chance that a kept entity is swapped for a different one, per section.
    pub incorrection_rate: f64,
    /// Chance that an injected error is flagged clinically significant.
    pub cs_probability: f64,
}

impl FaultProfile {
    pub const CLEAN: FaultProfile = FaultProfile {
        omission_rate: 0.0,
        incorrection_rate: 0.0,
        cs_probability: 0.0,
    };

    pub fn check(&self) -> Result<(), SynthError> {
        for (name, v) in [
            ("omission_rate", self.omission_rate),
            ("incorrection_rate", self.incorrection_rate),
            ("cs_probability", self.cs_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::InvalidProfile(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// The entity set sampled for one case, in lexicon order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseEntities {
    pub case_id: String,
    pub entities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub cases: Vec<CaseRecord>,
    /// Ground-truth reports, zh then en per case.
    pub reports: Vec<Report>,
    pub entities: Vec<CaseEntities>,
}

/// Independent stream per (seed, index) so cases can be generated in any
/// order or in parallel.
pub fn case_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn pick<K: Copy>(rng: &mut impl Rng, weights: &[(K, f64)]) -> K {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(k, w) in weights {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.iter().rev().find(|w| w.1 > 0.0).map(|w| w.0).expect("a positive weight")
}

/// Inclusion probabilities proportional to weight summing to `k`, with
/// items that would exceed 1 capped and the rest rescaled.
pub fn inclusion_probabilities(weights: &[f64], k: usize) -> Vec<f64> {
    let mut pi = vec![0.0; weights.len()];
    let mut capped = vec![false; weights.len()];
    loop {
        let remaining = k as f64 - capped.iter().filter(|c| **c).count() as f64;
        let free: f64 = weights.iter().zip(&capped).filter(|(_, c)| !**c).map(|(w, _)| w).sum();
        let mut changed = false;
        for i in 0..weights.len() {
            if capped[i] {
                pi[i] = 1.0;
                continue;
            }
            pi[i] = if free > 0.0 { remaining * weights[i] / free } else { 0.0 };
            if pi[i] >= 1.0 {
                capped[i] = true;
                changed = true;
            }
        }
        if !changed {
            return pi;
        }
    }
}

/// Systematic sampling of exactly `k` distinct indices over a random
/// ordering, so each index appears with its inclusion probability.
fn sample_without_replacement(rng: &mut impl Rng, weights: &[f64], k: usize) -> Vec<usize> {
    let positive = weights.iter().filter(|w| **w > 0.0).count();
    let k = k.min(positive);
    let pi = inclusion_probabilities(weights, k);
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    order.shuffle(rng);
    let u: f64 = rng.random();
    let mut chosen = Vec::with_capacity(k);
    let mut cum = 0.0;
    let mut next = u;
    for &i in &order {
        cum += pi[i];
        while chosen.len() < k && next < cum - 1e-12 {
            if chosen.last() != Some(&i) {
                chosen.push(i);
            }
            next += 1.0;
        }
    }
    // Floating-point slack can leave the last pick unmade.
    for &i in order.iter().rev() {
        if chosen.len() >= k {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen
}

// ---- templates ----

fn first_surface(lexicon: &EntityLexicon, id: &str, lang: Language) -> String {
    let e = lexicon.get(id).expect("entity from lexicon");
    match lang {
        Language::En => e.surfaces_en[0].clone(),
        Language::Zh => e.surfaces_zh[0].clone(),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

pub fn overview_sentence(lang: Language) -> &'static str {
    match lang {
        Language::En => "The scan covers the region of interest with adequate image quality.",
        Language::Zh => "扫描范围包括目标区域，图像质量满足诊断要求。",
    }
}

/// Impression text used when every clause has been removed.
pub fn empty_impression(lang: Language) -> &'static str {
    match lang {
        Language::En => "No other remarkable abnormality.",
        Language::Zh => "余未见明显异常。",
    }
}

pub fn finding_sentence(lexicon: &EntityLexicon, id: &str, lang: Language) -> String {
    let s = first_surface(lexicon, id, lang);
    match lang {
        Language::En => format!("Imaging features of {s} are present."),
        Language::Zh => format!("可见{s}相关影像表现。"),
    }
}

fn clause_separator(lang: Language) -> &'static str {
    match lang {
        Language::En => "; ",
        Language::Zh => "；",
    }
}

fn render_findings(sentences: &[String], lang: Language) -> String {
    let mut parts = vec![overview_sentence(lang).to_string()];
    parts.extend(sentences.iter().cloned());
    match lang {
        Language::En => parts.join(" "),
        Language::Zh => parts.concat(),
    }
}

fn render_impression(clauses: &[String], lang: Language) -> String {
    if clauses.is_empty() {
        return empty_impression(lang).to_string();
    }
    let body = clauses.join(clause_separator(lang));
    match lang {
        Language::En => format!("{}.", capitalize(&body)),
        Language::Zh => format!("{body}。"),
    }
}

/// Rigid rendering: an overview sentence plus one sentence per entity in
/// the findings, one clause per entity in the impression.
pub fn render_report(lexicon: &EntityLexicon, case_id: &str, arm: Arm, lang: Language, entities: &[String]) -> Report {
    let sentences: Vec<String> = entities.iter().map(|e| finding_sentence(lexicon, e, lang)).collect();
    let clauses: Vec<String> = entities.iter().map(|e| first_surface(lexicon, e, lang)).collect();
    Report {
        report_id: report_id(case_id, arm, lang),
        case_id: case_id.to_string(),
        arm,
        language: lang,
        findings: render_findings(&sentences, lang),
        impression: render_impression(&clauses, lang),
    }
}

pub fn report_id(case_id: &str, arm: Arm, lang: Language) -> String {
    format!("{case_id}-{}-{}", arm.tag(), lang.as_str())
}

pub fn case_id(index: usize) -> String {
    format!("case-{index:05}")
}

/// Generates one case; depends only on (spec.seed, index).
pub fn synth_case(spec: &CohortSpec, lexicon: &EntityLexicon, index: usize) -> (CaseRecord, Vec<Report>, CaseEntities) {
    let mut rng = case_rng(spec.seed, index as u64);
    let ids: Vec<&String> = spec.entity_frequency.keys().collect();
    let weights: Vec<f64> = spec.entity_frequency.values().copied().collect();
    let k = rng.random_range(spec.min_entities..=spec.max_entities);
    let mut entities: Vec<String> = sample_without_replacement(&mut rng, &weights, k)
        .into_iter()
        .map(|i| ids[i].clone())
        .collect();
    entities.sort_by_key(|id| lexicon.position(id));

    let department = pick(&mut rng, &spec.department_mix.iter().map(|(k, v)| (*k, *v)).collect::<Vec<_>>());
    let fov = pick(&mut rng, &spec.fov_mix.iter().map(|(k, v)| (*k, *v)).collect::<Vec<_>>());
    let sex = pick(&mut rng, &SEX_COUNTS);
    let spacing = pick(&mut rng, &SPACING_COUNTS);
    let age = Normal::new(AGE_MEAN, AGE_SD).expect("valid normal").sample(&mut rng);
    let slice_count = match fov {
        Fov::Large => rng.random_range(400..=600),
        Fov::Moderate => rng.random_range(250..=450),
        Fov::Small => rng.random_range(150..=300),
    };
    let id = case_id(index);
    let case = CaseRecord {
        case_id: id.clone(),
        sex,
        age_years: age.round().clamp(3.0, 90.0) as u32,
        department,
        fov,
        clinical_diagnosis: lexicon.get(&entities[0]).expect("entity").display_en.to_lowercase(),
        slice_count,
        pixel_spacing_mm: (spacing, spacing),
    };
    let reports = Language::ALL
        .iter()
        .map(|&lang| render_report(lexicon, &id, Arm::GroundTruth, lang, &entities))
        .collect();
    (case, reports, CaseEntities { case_id: id, entities })
}

pub fn synth_cohort(spec: &CohortSpec, lexicon: &EntityLexicon) -> Result<SynthCorpus, SynthError> {
    spec.check(lexicon)?;
    let mut corpus = SynthCorpus {
        cases: Vec::with_capacity(spec.n_cases),
        reports: Vec::with_capacity(spec.n_cases * 2),
        entities: Vec::with_capacity(spec.n_cases),
    };
    for i in 0..spec.n_cases {
        let (case, reports, entities) = synth_case(spec, lexicon, i);
        corpus.cases.push(case);
        corpus.reports.extend(reports);
        corpus.entities.push(entities);
    }
    Ok(corpus)
}

// ---- fault injection ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub case_id: String,
    pub arm: Arm,
    pub section: Section,
    pub kind: ErrorKind,
    pub entity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<String>,
    pub clinically_significant: bool,
}

/// Per-section edit decided for one entity.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Edit {
    Keep,
    Omit,
    Replace(String),
}

fn decide(
    rng: &mut impl Rng,
    entities: &[String],
    lexicon: &EntityLexicon,
    profile: &FaultProfile,
) -> BTreeMap<(Section, String), Edit> {
    let present: BTreeSet<&str> = entities.iter().map(String::as_str).collect();
    let mut out = BTreeMap::new();
    for section in Section::ALL {
        let mut taken: BTreeSet<String> = BTreeSet::new();
        for e in entities {
            let edit = if rng.random::<f64>() < profile.omission_rate {
                Edit::Omit
            } else if rng.random::<f64>() < profile.incorrection_rate {
                let pool: Vec<&str> = lexicon
                    .entries()
                    .iter()
                    .map(|x| x.canonical_id.as_str())
                    .filter(|id| !present.contains(id) && !taken.contains(*id))
                    .collect();
                match pool.choose(rng) {
                    Some(r) => {
                        taken.insert(r.to_string());
                        Edit::Replace(r.to_string())
                    }
                    None => Edit::Keep,
                }
            } else {
                Edit::Keep
            };
            out.insert((section, e.clone()), edit);
        }
    }
    out
}

fn apply(report: &Report, entities: &[String], edits: &BTreeMap<(Section, String), Edit>, lexicon: &EntityLexicon) -> Report {
    let lang = report.language;
    let mut findings = report.findings.clone();
    let sep = clause_separator(lang);
    for e in entities {
        let sentence = finding_sentence(lexicon, e, lang);
        let replacement = match &edits[&(Section::Findings, e.clone())] {
            Edit::Keep => continue,
            Edit::Omit => String::new(),
            Edit::Replace(r) => finding_sentence(lexicon, r, lang),
        };
        let needle = match lang {
            Language::En if replacement.is_empty() => format!(" {sentence}"),
            _ => sentence.clone(),
        };
        findings = findings.replacen(&needle, &replacement, 1);
    }

    let terminator = match lang {
        Language::En => '.',
        Language::Zh => '。',
    };
    let body = report.impression.trim_end_matches(terminator);
    let mut clauses: Vec<String> = if report.impression == empty_impression(lang) {
        Vec::new()
    } else {
        body.split(sep).map(str::to_string).collect()
    };
    for e in entities {
        let surface = first_surface(lexicon, e, lang);
        let Some(pos) = clauses.iter().position(|c| c.eq_ignore_ascii_case(&surface)) else {
            continue;
        };
        match &edits[&(Section::Impression, e.clone())] {
            Edit::Keep => {}
            Edit::Omit => {
                clauses.remove(pos);
            }
            Edit::Replace(r) => clauses[pos] = first_surface(lexicon, r, lang),
        }
    }
    for c in clauses.iter_mut() {
        *c = c.to_lowercase();
    }
    Report {
        findings,
        impression: render_impression(&clauses, lang),
        ..report.clone()
    }
}

fn manifest_from(
    rng: &mut impl Rng,
    case_id: &str,
    arm: Arm,
    entities: &[String],
    edits: &BTreeMap<(Section, String), Edit>,
    profile: &FaultProfile,
) -> Vec<ManifestItem> {
    let mut items = Vec::new();
    for section in Section::ALL {
        for e in entities {
            let (kind, replacement) = match &edits[&(section, e.clone())] {
                Edit::Keep => continue,
                Edit::Omit => (ErrorKind::Omission, None),
                Edit::Replace(r) => (ErrorKind::Incorrection, Some(r.clone())),
            };
            items.push(ManifestItem {
                case_id: case_id.to_string(),
                arm,
                section,
                kind,
                entity: e.clone(),
                replacement,
                clinically_significant: rng.random::<f64>() < profile.cs_probability,
            });
        }
    }
    items
}

fn degrade_rng(seed: u64, case_id: &str, arm: Arm) -> ChaCha8Rng {
    let mut h = crate::metrics::fnv1a(seed, case_id.as_bytes());
    h = crate::metrics::fnv1a(h, arm.tag().as_bytes());
    ChaCha8Rng::seed_from_u64(h)
}

/// Degrades every language version of one case's report with the same
/// edits, relabelled as `arm`. Entities are read from the first report's
/// impression.
pub fn degrade_case(
    reports: &[Report],
    arm: Arm,
    profile: &FaultProfile,
    lexicon: &EntityLexicon,
    seed: u64,
) -> Result<(Vec<Report>, Vec<ManifestItem>), SynthError> {
    profile.check()?;
    let Some(first) = reports.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let mut entities: Vec<String> = lexicon.extract(&first.impression, first.language).into_iter().collect();
    entities.sort_by_key(|id| lexicon.position(id));
    let mut rng = degrade_rng(seed, &first.case_id, arm);
    let edits = decide(&mut rng, &entities, lexicon, profile);
    let manifest = manifest_from(&mut rng, &first.case_id, arm, &entities, &edits, profile);
    let out = reports
        .iter()
        .map(|r| {
            let mut d = apply(r, &entities, &edits, lexicon);
            d.arm = arm;
            d.report_id = report_id(&r.case_id, arm, r.language);
            d
        })
        .collect();
    Ok((out, manifest))
}

/// Single-report form of [`degrade_case`] that keeps the report's arm.
pub fn degrade(
    report: &Report,
    profile: &FaultProfile,
    lexicon: &EntityLexicon,
    seed: u64,
) -> Result<(Report, Vec<ManifestItem>), SynthError> {
    let (mut reports, manifest) = degrade_case(std::slice::from_ref(report), report.arm, profile, lexicon, seed)?;
    let mut r = reports.pop().expect("one report in, one out");
    r.report_id = report.report_id.clone();
    Ok((r, manifest))
}

/// Degrades the ground-truth reports of a corpus once per arm.
pub fn degrade_corpus(
    corpus: &SynthCorpus,
    profiles: &BTreeMap<Arm, FaultProfile>,
    lexicon: &EntityLexicon,
    seed: u64,
) -> Result<(Vec<Report>, Vec<ManifestItem>), SynthError> {
    let mut by_case: BTreeMap<&str, Vec<Report>> = BTreeMap::new();
    for r in corpus.reports.iter().filter(|r| r.arm == Arm::GroundTruth) {
        by_case.entry(r.case_id.as_str()).or_default().push(r.clone());
    }
    let mut reports = Vec::new();
    let mut manifest = Vec::new();
    for case in &corpus.cases {
        let Some(gt) = by_case.get(case.case_id.as_str()) else { continue };
        for (&arm, profile) in profiles {
            let (r, m) = degrade_case(gt, arm, profile, lexicon, seed)?;
            reports.extend(r);
            manifest.extend(m);
        }
    }
    Ok((reports, manifest))
}

/// Annotations a rater would give if they found exactly the injected
/// errors: ranks order arms by total error count (ties by arm order) and
/// rubric scores worsen with the matching error type.
pub fn auto_annotate(
    manifest: &[ManifestItem],
    case_ids: &[String],
    arms: &[Arm],
    rater_id: &str,
    role: RaterRole,
) -> Vec<Annotation> {
    let mut by_key: BTreeMap<(&str, Arm), Vec<&ManifestItem>> = BTreeMap::new();
    for m in manifest {
        by_key.entry((m.case_id.as_str(), m.arm)).or_default().push(m);
    }
    let mut out = Vec::new();
    for case_id in case_ids {
        let items = |arm: Arm| by_key.get(&(case_id.as_str(), arm)).map(Vec::as_slice).unwrap_or(&[]);
        let mut order: Vec<(usize, usize, Arm)> = arms.iter().enumerate().map(|(i, &a)| (items(a).len(), i, a)).collect();
        order.sort_unstable();
        for (rank, &(_, _, arm)) in order.iter().enumerate() {
            let its = items(arm);
            let count = |kind: ErrorKind| its.iter().filter(|m| m.kind == kind).count();
            let significant = its.iter().filter(|m| m.clinically_significant).count();
            let score = |n: usize| (1 + n.min(3)) as u8;
            out.push(Annotation {
                rater_id: rater_id.to_string(),
                role,
                case_id: case_id.clone(),
                arm,
                ranking: rank as u8 + 1,
                quality: QualityScores {
                    factual_consistency: score(count(ErrorKind::Incorrection)),
                    coherence: score(its.len() / 3),
                    medical_safety: score(significant),
                    clinical_use: score(count(ErrorKind::Omission)),
                },
                errors: its
                    .iter()
                    .map(|m| ErrorItem {
                        section: m.section,
                        kind: m.kind,
                        clinically_significant: m.clinically_significant,
                    })
                    .collect(),
            });
        }
    }
    out
}

/// A fault profile per arm that makes more experienced tiers cleaner.
pub fn tiered_profiles(arms: &[Arm]) -> BTreeMap<Arm, FaultProfile> {
    arms.iter()
        .map(|&arm| {
            let (o, i, cs) = match arm {
                Arm::GroundTruth => (0.0, 0.0, 0.0),
                Arm::Ai => (0.30, 0.25, 0.20),
                Arm::Novice => (0.45, 0.25, 0.30),
                Arm::Intermediate => (0.30, 0.12, 0.25),
                Arm::Senior => (0.15, 0.08, 0.15),
                Arm::CoNovice => (0.35, 0.20, 0.25),
                Arm::CoIntermediate => (0.22, 0.10, 0.20),
                Arm::CoSenior => (0.12, 0.07, 0.12),
            };
            (arm, FaultProfile { omission_rate: o, incorrection_rate: i, cs_probability: cs })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> EntityLexicon {
        EntityLexicon::builtin()
    }

    #[test]
    fn default_spec_is_valid() {
        let l = lex();
        let spec = CohortSpec::with_defaults(&l, 10, 1);
        spec.check(&l).unwrap();
        assert_eq!(spec.entity_frequency.len(), l.len());
        assert_eq!(spec.entity_frequency["impacted_tooth"], 4896.0);
        assert_eq!(spec.entity_frequency["osteoma"], DEFAULT_TAIL_WEIGHT);
    }

    #[test]
    fn spec_validation() {
        let l = lex();
        let mut spec = CohortSpec::with_defaults(&l, 10, 1);
        spec.fov_mix.insert(Fov::Small, 0.5);
        assert!(matches!(spec.check(&l), Err(SynthError::InvalidSpec(_))));
        let mut spec = CohortSpec::with_defaults(&l, 10, 1);
        spec.entity_frequency.insert("nope".into(), 1.0);
        assert_eq!(spec.check(&l), Err(SynthError::UnknownEntity("nope".into())));
        let mut spec = CohortSpec::with_defaults(&l, 10, 1);
        spec.entity_frequency.values_mut().for_each(|w| *w = 0.0);
        assert!(spec.check(&l).is_err());
    }

    #[test]
    fn cohort_is_deterministic() {
        let l = lex();
        let spec = CohortSpec::with_defaults(&l, 50, 42);
        let a = synth_cohort(&spec, &l).unwrap();
        let b = synth_cohort(&spec, &l).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let other = synth_cohort(&CohortSpec { seed: 43, ..spec }, &l).unwrap();
        assert_ne!(a.entities, other.entities);
    }

    #[test]
    fn cases_are_valid_and_sized() {
        let l = lex();
        let spec = CohortSpec::with_defaults(&l, 200, 5);
        let c = synth_cohort(&spec, &l).unwrap();
        assert_eq!(c.cases.len(), 200);
        assert_eq!(c.reports.len(), 400);
        for (case, ents) in c.cases.iter().zip(&c.entities) {
            case.check().unwrap();
            assert!((1..=7).contains(&ents.entities.len()));
            let distinct: BTreeSet<&String> = ents.entities.iter().collect();
            assert_eq!(distinct.len(), ents.entities.len());
        }
    }

    #[test]
    fn single_entity_distribution() {
        let l = lex();
        let mut spec = CohortSpec::with_defaults(&l, 30, 9);
        spec.entity_frequency = [("sialolithiasis".to_string(), 1.0)].into_iter().collect();
        let c = synth_cohort(&spec, &l).unwrap();
        for r in &c.reports {
            assert_eq!(l.extract(&r.impression, r.language), ["sialolithiasis".to_string()].into());
        }
    }

    #[test]
    fn impressions_round_trip() {
        let l = lex();
        let spec = CohortSpec::with_defaults(&l, 500, 3);
        let c = synth_cohort(&spec, &l).unwrap();
        let sets: BTreeMap<&str, BTreeSet<String>> = c
            .entities
            .iter()
            .map(|e| (e.case_id.as_str(), e.entities.iter().cloned().collect()))
            .collect();
        for r in &c.reports {
            assert_eq!(l.extract(&r.impression, r.language), sets[r.case_id.as_str()], "{}", r.impression);
        }
    }

    #[test]
    fn every_entity_renders_and_round_trips_alone() {
        let l = lex();
        for e in l.entries() {
            for lang in Language::ALL {
                let r = render_report(&l, "c", Arm::GroundTruth, lang, std::slice::from_ref(&e.canonical_id));
                assert_eq!(l.extract(&r.impression, lang), [e.canonical_id.clone()].into(), "{}", r.impression);
                assert!(l.extract(empty_impression(lang), lang).is_empty());
            }
        }
    }

    #[test]
    fn inclusion_probabilities_cap_and_sum() {
        let pi = inclusion_probabilities(&[10.0, 1.0, 1.0, 1.0], 2);
        assert_eq!(pi[0], 1.0);
        assert!((pi.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn systematic_sampling_hits_marginals() {
        let weights = [5.0, 3.0, 1.0, 1.0];
        let pi = inclusion_probabilities(&weights, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut hits = [0usize; 4];
        let trials = 20_000;
        for _ in 0..trials {
            let s = sample_without_replacement(&mut rng, &weights, 2);
            assert_eq!(s.len(), 2);
            for i in s {
                hits[i] += 1;
            }
        }
        for i in 0..4 {
            assert!((hits[i] as f64 / trials as f64 - pi[i]).abs() < 0.02, "{i}: {hits:?} vs {pi:?}");
        }
    }

    fn gt(l: &EntityLexicon, entities: &[&str], lang: Language) -> Report {
        let e: Vec<String> = entities.iter().map(|s| s.to_string()).collect();
        render_report(l, "c1", Arm::GroundTruth, lang, &e)
    }

    #[test]
    fn zero_rates_leave_report_unchanged() {
        let l = lex();
        let r = gt(&l, &["apical_periodontitis", "impacted_tooth"], Language::En);
        let (d, m) = degrade(&r, &FaultProfile::CLEAN, &l, 1).unwrap();
        assert_eq!(d, r);
        assert!(m.is_empty());
    }

    #[test]
    fn full_omission_removes_sentence_and_clause() {
        let l = lex();
        for lang in Language::ALL {
            let r = gt(&l, &["impacted_tooth"], lang);
            let profile = FaultProfile { omission_rate: 1.0, incorrection_rate: 0.0, cs_probability: 0.0 };
            let (d, m) = degrade(&r, &profile, &l, 1).unwrap();
            assert_eq!(m.len(), 2);
            assert!(m.iter().all(|i| i.kind == ErrorKind::Omission && i.entity == "impacted_tooth"));
            assert_eq!(d.findings, overview_sentence(lang));
            assert_eq!(d.impression, empty_impression(lang));
            assert!(l.extract(&d.impression, lang).is_empty());
        }
    }

    #[test]
    fn incorrection_swaps_to_absent_lexicon_entity() {
        let l = lex();
        let r = gt(&l, &["apical_periodontitis", "malocclusion"], Language::Zh);
        let profile = FaultProfile { omission_rate: 0.0, incorrection_rate: 1.0, cs_probability: 1.0 };
        let (d, m) = degrade(&r, &profile, &l, 4).unwrap();
        assert_eq!(m.len(), 4);
        let found = l.extract(&d.impression, Language::Zh);
        let replaced: BTreeSet<String> = m
            .iter()
            .filter(|i| i.section == Section::Impression)
            .map(|i| i.replacement.clone().unwrap())
            .collect();
        assert_eq!(found, replaced);
        assert!(!found.contains("apical_periodontitis") && !found.contains("malocclusion"));
        assert!(m.iter().all(|i| i.clinically_significant));
    }

    #[test]
    fn degrade_is_seeded() {
        let l = lex();
        let r = gt(&l, &["apical_periodontitis", "impacted_tooth", "dental_caries", "malocclusion"], Language::En);
        let p = FaultProfile { omission_rate: 0.4, incorrection_rate: 0.4, cs_probability: 0.5 };
        assert_eq!(degrade(&r, &p, &l, 9).unwrap(), degrade(&r, &p, &l, 9).unwrap());
    }

    #[test]
    fn bilingual_case_gets_identical_edits() {
        let l = lex();
        let ents = ["apical_periodontitis", "impacted_tooth", "dental_caries"];
        let reports = vec![gt(&l, &ents, Language::Zh), gt(&l, &ents, Language::En)];
        let p = FaultProfile { omission_rate: 0.5, incorrection_rate: 0.5, cs_probability: 0.5 };
        for seed in 0..20 {
            let (d, _) = degrade_case(&reports, Arm::Novice, &p, &l, seed).unwrap();
            assert_eq!(l.extract(&d[0].impression, Language::Zh), l.extract(&d[1].impression, Language::En));
            assert!(d.iter().all(|r| r.arm == Arm::Novice));
        }
    }

    #[test]
    fn auto_annotation_ranks_by_error_count() {
        let item = |arm: Arm, kind: ErrorKind| ManifestItem {
            case_id: "c1".into(),
            arm,
            section: Section::Findings,
            kind,
            entity: "impacted_tooth".into(),
            replacement: None,
            clinically_significant: true,
        };
        let manifest = vec![
            item(Arm::Novice, ErrorKind::Omission),
            item(Arm::Novice, ErrorKind::Omission),
            item(Arm::Ai, ErrorKind::Incorrection),
        ];
        let anns = auto_annotate(&manifest, &["c1".into()], &Arm::AI_VERSUS_MANUAL, "auto", RaterRole::Radiologist);
        let rank = |arm: Arm| anns.iter().find(|a| a.arm == arm).unwrap().ranking;
        assert_eq!(rank(Arm::Intermediate), 1);
        assert_eq!(rank(Arm::Senior), 2);
        assert_eq!(rank(Arm::Ai), 3);
        assert_eq!(rank(Arm::Novice), 4);
        let novice = anns.iter().find(|a| a.arm == Arm::Novice).unwrap();
        assert_eq!(novice.quality.clinical_use, 3);
        assert_eq!(novice.quality.medical_safety, 3);
        assert_eq!(novice.errors.len(), 2);
    }
}

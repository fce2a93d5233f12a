//! Scripted raters for load tests and demos: a synthetic study whose
//! degradation manifest is known, and a rater who reports exactly the
//! injected errors. The rater only sees what a real one sees (aliases and
//! report text) and recovers arms by matching text against the corpus.

use std::collections::{BTreeMap, HashMap};

use crb_core::human_eval::Annotation;
use crb_core::model::{Arm, CaseRecord, Language, RaterRole, Report, StudyConfig};
use crb_core::parser::EntityLexicon;
use crb_core::synth::{
    auto_annotate, degrade_corpus, synth_cohort, tiered_profiles, CohortSpec, FaultProfile, ManifestItem, SynthError,
};

use crate::client::{Client, ClientError};
use crate::study::{AliasRating, RatingTask, Submission};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: StudyConfig,
    pub cases: Vec<CaseRecord>,
    /// One report per (case, arm, language), arms limited to the study's.
    pub reports: Vec<Report>,
    pub manifest: Vec<ManifestItem>,
}

impl Scenario {
    /// Synthesizes `n_cases` and degrades them with [`tiered_profiles`].
    pub fn synthetic(config: StudyConfig, n_cases: usize, seed: u64, lexicon: &EntityLexicon) -> Result<Self, SynthError> {
        let arms: Vec<Arm> = config.arms_in_scope.iter().copied().collect();
        Self::with_profiles(config, n_cases, seed, lexicon, &tiered_profiles(&arms))
    }

    pub fn with_profiles(
        config: StudyConfig,
        n_cases: usize,
        seed: u64,
        lexicon: &EntityLexicon,
        profiles: &BTreeMap<Arm, FaultProfile>,
    ) -> Result<Self, SynthError> {
        let corpus = synth_cohort(&CohortSpec::with_defaults(lexicon, n_cases, seed), lexicon)?;
        let (reports, manifest) = degrade_corpus(&corpus, profiles, lexicon, seed)?;
        Ok(Self { config, cases: corpus.cases, reports, manifest })
    }

    pub fn case_ids(&self) -> Vec<String> {
        self.cases.iter().map(|c| c.case_id.clone()).collect()
    }
}

type TextKey = (String, Language, String, String);

#[derive(Debug, Clone)]
pub struct OracleRater {
    pub rater_id: String,
    pub role: RaterRole,
    by_text: HashMap<TextKey, Vec<Arm>>,
    answers: HashMap<(String, Arm), Annotation>,
}

impl OracleRater {
    pub fn new(scenario: &Scenario, rater_id: &str, role: RaterRole) -> Self {
        let arms: Vec<Arm> = scenario.config.arms_in_scope.iter().copied().collect();
        let mut by_text: HashMap<TextKey, Vec<Arm>> = HashMap::new();
        for r in &scenario.reports {
            let key = (r.case_id.clone(), r.language, r.findings.clone(), r.impression.clone());
            let v = by_text.entry(key).or_default();
            if !v.contains(&r.arm) {
                v.push(r.arm);
                v.sort_unstable();
            }
        }
        let answers = auto_annotate(&scenario.manifest, &scenario.case_ids(), &arms, rater_id, role)
            .into_iter()
            .map(|a| ((a.case_id.clone(), a.arm), a))
            .collect();
        Self { rater_id: rater_id.to_string(), role, by_text, answers }
    }

    /// The annotations this rater intends to submit, keyed by case and arm.
    pub fn intended(&self) -> impl Iterator<Item = &Annotation> {
        self.answers.values()
    }

    /// Identical texts from different arms are resolved in arm order; such
    /// arms carry identical error lists, so only their ranks can swap.
    pub fn answer(&self, task: &RatingTask) -> Result<Submission, String> {
        let case_id = &task.case.case_id;
        let mut used: Vec<Arm> = Vec::new();
        let mut ratings = Vec::new();
        for c in &task.presented {
            let body = c.reports.first().ok_or_else(|| format!("{}: {} has no report", task.task_id, c.alias))?;
            let key = (case_id.clone(), body.language, body.findings.clone(), body.impression.clone());
            let arm = self
                .by_text
                .get(&key)
                .and_then(|arms| arms.iter().find(|a| !used.contains(a)).copied())
                .ok_or_else(|| format!("{}: {} matches no unused arm", task.task_id, c.alias))?;
            used.push(arm);
            let a = self
                .answers
                .get(&(case_id.clone(), arm))
                .ok_or_else(|| format!("no intended annotation for {case_id}/{arm}"))?;
            let q = &a.quality;
            ratings.push(AliasRating {
                alias: c.alias.clone(),
                rank: a.ranking,
                quality: [q.factual_consistency, q.coherence, q.medical_safety, q.clinical_use],
                errors: a.errors.clone(),
            });
        }
        Ok(Submission { ratings })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("{0}")]
    Rater(String),
}

const BATCH: usize = 1000;

/// Creates the study and loads cases and reports in batches.
pub fn load(client: &Client, scenario: &Scenario) -> Result<(), SimError> {
    client.create_study(&scenario.config.clone().into())?;
    for chunk in scenario.cases.chunks(BATCH) {
        client.add_cases(&scenario.config.study_id, chunk)?;
    }
    for chunk in scenario.reports.chunks(BATCH) {
        client.add_reports(&scenario.config.study_id, chunk)?;
    }
    Ok(())
}

/// Registers the rater and works through tasks until none remain.
/// Returns the number of tasks submitted.
pub fn run(client: &Client, study_id: &str, rater: &OracleRater) -> Result<usize, SimError> {
    client.register_rater(study_id, &rater.rater_id, rater.role)?;
    let mut done = 0;
    while let Some(task) = client.next_task(study_id, &rater.rater_id)? {
        let submission = rater.answer(&task).map_err(SimError::Rater)?;
        client.submit(&task.task_id, &submission)?;
        done += 1;
    }
    Ok(done)
}

//! In-memory study state. Commands are checked against the current state
//! and turned into events; `apply` is the only mutator.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crb_core::human_eval::{Annotation, ErrorItem, QualityScores};
use crb_core::model::{Arm, CaseRecord, Language, RaterRole, Report, StudyConfig};
use crb_core::summary::{summarize, Summary};

use crate::blinding::assign_aliases;
use crate::error::ServiceError;
use crate::events::{Event, EventRecord, IssuedTask};

#[derive(Debug, Clone)]
struct TaskState {
    issued: IssuedTask,
    submitted: bool,
}

#[derive(Debug, Clone)]
pub struct Study {
    pub config: StudyConfig,
    pub log: Vec<EventRecord>,
    raters: BTreeMap<String, RaterRole>,
    cases: Vec<CaseRecord>,
    case_index: HashMap<String, usize>,
    reports: BTreeMap<(String, Arm), BTreeMap<Language, Report>>,
    tasks: BTreeMap<String, TaskState>,
    /// (rater, case) → task id, for issued tasks.
    by_pair: HashMap<(String, String), String>,
    annotations: Vec<Annotation>,
}

/// Report text shown to a rater; carries no identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportBody {
    pub language: Language,
    pub findings: String,
    pub impression: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub alias: String,
    pub reports: Vec<ReportBody>,
}

/// Case context shown beside the candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePanel {
    pub case_id: String,
    pub sex: crb_core::model::Sex,
    pub age_years: u32,
    pub department: crb_core::model::Department,
    pub fov: crb_core::model::Fov,
    pub clinical_diagnosis: String,
    pub slice_count: u32,
    pub pixel_spacing_mm: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTask {
    pub task_id: String,
    pub rater_id: String,
    pub case_index: usize,
    pub case: CasePanel,
    pub scale: u8,
    pub presented: Vec<Candidate>,
}

/// One alias's verdict in a submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasRating {
    pub alias: String,
    pub rank: u8,
    /// Factual consistency, coherence, medical safety, clinical use.
    pub quality: [u8; 4],
    #[serde(default)]
    pub errors: Vec<ErrorItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub ratings: Vec<AliasRating>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResults {
    pub study_id: String,
    pub last_seq: u64,
    pub n_cases: usize,
    pub n_raters: usize,
    pub completed_tasks: usize,
    pub summary: Summary,
}

impl Study {
    /// State right after a `study_created` event.
    pub fn new(config: StudyConfig) -> Self {
        Self {
            config,
            log: Vec::new(),
            raters: BTreeMap::new(),
            cases: Vec::new(),
            case_index: HashMap::new(),
            reports: BTreeMap::new(),
            tasks: BTreeMap::new(),
            by_pair: HashMap::new(),
            annotations: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.config.study_id
    }

    pub fn next_seq(&self) -> u64 {
        self.log.len() as u64 + 1
    }

    pub fn task_ids(&self) -> impl Iterator<Item = &String> {
        self.tasks.keys()
    }

    /// Rebuilds a study from its full log, checking seq continuity.
    pub fn replay(records: Vec<EventRecord>) -> Result<Self, ServiceError> {
        let mut iter = records.into_iter();
        let first = iter.next().ok_or_else(|| ServiceError::Corrupt("empty event log".into()))?;
        let Event::StudyCreated(config) = &first.event else {
            return Err(ServiceError::Corrupt("log does not start with study_created".into()));
        };
        let mut study = Study::new(config.clone());
        study.apply(first)?;
        for rec in iter {
            study.apply(rec)?;
        }
        Ok(study)
    }

    /// Folds one event into the state.
    pub fn apply(&mut self, rec: EventRecord) -> Result<(), ServiceError> {
        if rec.seq != self.next_seq() || rec.study_id != self.config.study_id {
            return Err(ServiceError::Corrupt(format!(
                "expected seq {} of study {}, found seq {} of {}",
                self.next_seq(),
                self.config.study_id,
                rec.seq,
                rec.study_id
            )));
        }
        match &rec.event {
            Event::StudyCreated(config) => {
                if !self.log.is_empty() || config != &self.config {
                    return Err(ServiceError::Corrupt("unexpected study_created".into()));
                }
            }
            Event::RaterRegistered { rater_id, role } => {
                self.raters.insert(rater_id.clone(), *role);
            }
            Event::CaseAdded(case) => {
                self.case_index.insert(case.case_id.clone(), self.cases.len());
                self.cases.push(case.clone());
            }
            Event::ReportAdded(report) => {
                self.reports
                    .entry((report.case_id.clone(), report.arm))
                    .or_default()
                    .insert(report.language, report.clone());
            }
            Event::TaskIssued(task) => {
                self.by_pair.insert((task.rater_id.clone(), task.case_id.clone()), task.task_id.clone());
                self.tasks.insert(task.task_id.clone(), TaskState { issued: task.clone(), submitted: false });
            }
            Event::AnnotationSubmitted { task_id, annotations } => {
                let t = self
                    .tasks
                    .get_mut(task_id)
                    .ok_or_else(|| ServiceError::Corrupt(format!("annotation for unknown task {task_id}")))?;
                t.submitted = true;
                self.annotations.extend(annotations.iter().cloned());
            }
        }
        self.log.push(rec);
        Ok(())
    }

    // ---- commands: return the event to append, or None for a no-op ----

    pub fn register_rater(&self, rater_id: &str, role: RaterRole) -> Result<Option<Event>, ServiceError> {
        if rater_id.is_empty() {
            return Err(ServiceError::Invalid("rater_id must not be empty".into()));
        }
        if !self.config.rater_roles.contains(&role) {
            return Err(ServiceError::Invalid(format!("role {} is not part of this study", role.as_str())));
        }
        match self.raters.get(rater_id) {
            Some(r) if *r == role => Ok(None),
            Some(r) => Err(ServiceError::Conflict(format!("rater {rater_id} is already registered as {}", r.as_str()))),
            None => Ok(Some(Event::RaterRegistered { rater_id: rater_id.to_string(), role })),
        }
    }

    pub fn add_case(&self, case: &CaseRecord) -> Result<Option<Event>, ServiceError> {
        case.check().map_err(ServiceError::Invalid)?;
        match self.case_index.get(&case.case_id) {
            Some(&i) if &self.cases[i] == case => Ok(None),
            Some(_) => Err(ServiceError::Conflict(format!("case {} exists with different metadata", case.case_id))),
            None => Ok(Some(Event::CaseAdded(case.clone()))),
        }
    }

    pub fn add_report(&self, report: &Report) -> Result<Option<Event>, ServiceError> {
        if !self.case_index.contains_key(&report.case_id) {
            return Err(ServiceError::Invalid(format!("report for unknown case {}", report.case_id)));
        }
        if !self.config.arms_in_scope.contains(&report.arm) {
            return Err(ServiceError::Invalid(format!("arm {} is not part of this study", report.arm)));
        }
        if report.findings.trim().is_empty() && report.impression.trim().is_empty() {
            return Err(ServiceError::Invalid(format!("report {} is empty", report.report_id)));
        }
        let existing = self
            .reports
            .get(&(report.case_id.clone(), report.arm))
            .and_then(|m| m.get(&report.language));
        match existing {
            Some(r) if r == report => Ok(None),
            Some(_) => Err(ServiceError::Conflict(format!(
                "case {} already has a different {} report for this arm",
                report.case_id, report.language
            ))),
            None => Ok(Some(Event::ReportAdded(report.clone()))),
        }
    }

    fn arms(&self) -> Vec<Arm> {
        self.config.arms_in_scope.iter().copied().collect()
    }

    /// Languages every in-scope arm has a report in, for one case.
    fn shared_languages(&self, case_id: &str) -> BTreeSet<Language> {
        let mut shared: Option<BTreeSet<Language>> = None;
        for arm in self.arms() {
            let langs: BTreeSet<Language> = self
                .reports
                .get(&(case_id.to_string(), arm))
                .map(|m| m.keys().copied().collect())
                .unwrap_or_default();
            shared = Some(match shared {
                None => langs,
                Some(s) => s.intersection(&langs).copied().collect(),
            });
        }
        shared.unwrap_or_default()
    }

    fn rater_role(&self, rater_id: &str) -> Result<RaterRole, ServiceError> {
        self.raters
            .get(rater_id)
            .copied()
            .ok_or_else(|| ServiceError::UnknownRater(rater_id.to_string()))
    }

    /// The lowest-index case this rater has not submitted and whose
    /// candidate set is complete. Reissuing an outstanding task is a no-op.
    pub fn next_task(&self, rater_id: &str) -> Result<(Option<RatingTask>, Option<Event>), ServiceError> {
        self.rater_role(rater_id)?;
        for (index, case) in self.cases.iter().enumerate() {
            let key = (rater_id.to_string(), case.case_id.clone());
            if let Some(task_id) = self.by_pair.get(&key) {
                let t = &self.tasks[task_id];
                if t.submitted {
                    continue;
                }
                return Ok((Some(self.render_task(&t.issued, index)), None));
            }
            if self.shared_languages(&case.case_id).is_empty() {
                continue;
            }
            let issued = IssuedTask {
                task_id: format!("{}-t{:06}", self.config.study_id, self.tasks.len() + 1),
                rater_id: rater_id.to_string(),
                case_id: case.case_id.clone(),
                aliases: assign_aliases(&self.arms(), self.config.blinding_seed, &case.case_id, rater_id),
            };
            let task = self.render_task(&issued, index);
            return Ok((Some(task), Some(Event::TaskIssued(issued))));
        }
        Ok((None, None))
    }

    fn render_task(&self, issued: &IssuedTask, case_index: usize) -> RatingTask {
        let case = &self.cases[case_index];
        let langs = self.shared_languages(&case.case_id);
        let presented = issued
            .aliases
            .iter()
            .map(|(alias, arm)| {
                let reports = &self.reports[&(case.case_id.clone(), *arm)];
                Candidate {
                    alias: alias.clone(),
                    reports: langs
                        .iter()
                        .map(|l| {
                            let r = &reports[l];
                            ReportBody { language: *l, findings: r.findings.clone(), impression: r.impression.clone() }
                        })
                        .collect(),
                }
            })
            .collect();
        RatingTask {
            task_id: issued.task_id.clone(),
            rater_id: issued.rater_id.clone(),
            case_index,
            case: CasePanel {
                case_id: case.case_id.clone(),
                sex: case.sex,
                age_years: case.age_years,
                department: case.department,
                fov: case.fov,
                clinical_diagnosis: case.clinical_diagnosis.clone(),
                slice_count: case.slice_count,
                pixel_spacing_mm: case.pixel_spacing_mm,
            },
            scale: self.config.rank_scale,
            presented,
        }
    }

    pub fn has_task(&self, task_id: &str) -> bool {
        self.tasks.contains_key(task_id)
    }

    /// Validates a submission and de-aliases it into annotations.
    pub fn submit(&self, task_id: &str, submission: &Submission) -> Result<Event, ServiceError> {
        let t = self.tasks.get(task_id).ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))?;
        if t.submitted {
            return Err(ServiceError::DuplicateSubmission(task_id.to_string()));
        }
        let aliases: BTreeMap<&str, Arm> = t.issued.aliases.iter().map(|(a, arm)| (a.as_str(), *arm)).collect();
        let given: BTreeSet<&str> = submission.ratings.iter().map(|r| r.alias.as_str()).collect();
        if given.len() != submission.ratings.len() || given != aliases.keys().copied().collect() {
            return Err(ServiceError::Invalid(format!(
                "ratings must cover each of {:?} exactly once",
                aliases.keys().collect::<Vec<_>>()
            )));
        }
        let scale = self.config.rank_scale;
        let ranks: BTreeSet<u8> = submission.ratings.iter().map(|r| r.rank).collect();
        if ranks != (1..=scale).collect() {
            let mut got: Vec<u8> = submission.ratings.iter().map(|r| r.rank).collect();
            got.sort_unstable();
            return Err(ServiceError::RankNotPermutation(format!("ranks {got:?} are not a permutation of 1..={scale}")));
        }
        for r in &submission.ratings {
            if let Some(bad) = r.quality.iter().find(|q| !(1..=4).contains(*q)) {
                return Err(ServiceError::ScoreOutOfRange(format!("{}: quality score {bad} is outside 1..=4", r.alias)));
            }
        }
        let role = self.rater_role(&t.issued.rater_id)?;
        let annotations = submission
            .ratings
            .iter()
            .map(|r| {
                let [factual_consistency, coherence, medical_safety, clinical_use] = r.quality;
                Annotation {
                    rater_id: t.issued.rater_id.clone(),
                    role,
                    case_id: t.issued.case_id.clone(),
                    arm: aliases[r.alias.as_str()],
                    ranking: r.rank,
                    quality: QualityScores { factual_consistency, coherence, medical_safety, clinical_use },
                    errors: r.errors.clone(),
                }
            })
            .collect();
        Ok(Event::AnnotationSubmitted { task_id: task_id.to_string(), annotations })
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn cases(&self) -> &[CaseRecord] {
        &self.cases
    }

    /// Aggregates over the current log; a pure function of it.
    pub fn results(&self) -> Result<StudyResults, ServiceError> {
        let summary = summarize(&self.annotations, &self.cases, self.config.rank_scale)
            .map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        Ok(StudyResults {
            study_id: self.config.study_id.clone(),
            last_seq: self.log.len() as u64,
            n_cases: self.cases.len(),
            n_raters: self.raters.len(),
            completed_tasks: self.tasks.values().filter(|t| t.submitted).count(),
            summary,
        })
    }
}

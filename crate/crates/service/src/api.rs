//! Shared state and HTTP handlers.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crb_core::model::{Arm, CaseRecord, RaterRole, Report, StudyConfig};

use crate::error::ServiceError;
use crate::events::{now_ms, Event, EventRecord};
use crate::store::LogStore;
use crate::study::{RatingTask, Study, StudyResults, Submission};

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    studies: RwLock<HashMap<String, Arc<Mutex<Study>>>>,
    /// task id → study id
    tasks: RwLock<HashMap<String, String>>,
    store: LogStore,
    default_blinding_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateStudy {
    pub study_id: String,
    pub arms_in_scope: BTreeSet<Arm>,
    pub rank_scale: u8,
    pub rater_roles: BTreeSet<RaterRole>,
    /// Falls back to the server default when absent.
    #[serde(default)]
    pub blinding_seed: Option<u64>,
}

impl From<StudyConfig> for CreateStudy {
    fn from(c: StudyConfig) -> Self {
        Self {
            study_id: c.study_id,
            arms_in_scope: c.arms_in_scope,
            rank_scale: c.rank_scale,
            rater_roles: c.rater_roles,
            blinding_seed: Some(c.blinding_seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyCreated {
    pub study_id: String,
    pub seq: u64,
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterRater {
    pub rater_id: String,
    pub role: RaterRole,
}

/// Ack for batch ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ingested {
    pub added: usize,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionAck {
    pub task_id: String,
    pub stored: usize,
    pub seq: u64,
}

/// Either one record or a list of them.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    Many(Vec<T>),
    One(T),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::Many(v) => v,
            OneOrMany::One(x) => vec![x],
        }
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl AppState {
    /// Opens the store and replays every study log found in it.
    pub fn open(store: LogStore, default_blinding_seed: u64) -> Result<Self, ServiceError> {
        let mut studies = HashMap::new();
        let mut tasks = HashMap::new();
        for log in store.load_all()? {
            let study = Study::replay(log)?;
            for t in study.task_ids() {
                tasks.insert(t.clone(), study.id().to_string());
            }
            studies.insert(study.id().to_string(), Arc::new(Mutex::new(study)));
        }
        Ok(Self {
            inner: Arc::new(Inner {
                studies: RwLock::new(studies),
                tasks: RwLock::new(tasks),
                store,
                default_blinding_seed,
            }),
        })
    }

    pub fn in_memory(default_blinding_seed: u64) -> Self {
        Self::open(LogStore::new(None).expect("no directory to create"), default_blinding_seed)
            .expect("nothing to replay")
    }

    fn study(&self, id: &str) -> Result<Arc<Mutex<Study>>, ServiceError> {
        self.inner
            .studies
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownStudy(id.to_string()))
    }

    /// Persists then applies; the caller holds the study lock, which is what
    /// serializes writes per study.
    fn commit(&self, study: &mut Study, event: Event) -> Result<u64, ServiceError> {
        let rec = EventRecord { study_id: study.id().to_string(), seq: study.next_seq(), timestamp_ms: now_ms(), event };
        self.inner.store.append(&rec)?;
        let seq = rec.seq;
        if let Event::TaskIssued(t) = &rec.event {
            self.inner
                .tasks
                .write()
                .unwrap_or_else(|p| p.into_inner())
                .insert(t.task_id.clone(), study.id().to_string());
        }
        study.apply(rec)?;
        Ok(seq)
    }

    pub fn create_study(&self, req: CreateStudy) -> Result<StudyCreated, ServiceError> {
        let config = StudyConfig {
            study_id: req.study_id,
            arms_in_scope: req.arms_in_scope,
            rank_scale: req.rank_scale,
            rater_roles: req.rater_roles,
            blinding_seed: req.blinding_seed.unwrap_or(self.inner.default_blinding_seed),
        };
        config.check().map_err(|e| ServiceError::Invalid(e.to_string()))?;
        let mut studies = self.inner.studies.write().unwrap_or_else(|p| p.into_inner());
        if let Some(existing) = studies.get(&config.study_id) {
            let s = lock(existing);
            return if s.config == config {
                Ok(StudyCreated { study_id: config.study_id.clone(), seq: 1, created: false })
            } else {
                Err(ServiceError::Conflict(format!("study {} exists with a different config", config.study_id)))
            };
        }
        let mut study = Study::new(config.clone());
        let seq = self.commit(&mut study, Event::StudyCreated(config.clone()))?;
        studies.insert(config.study_id.clone(), Arc::new(Mutex::new(study)));
        Ok(StudyCreated { study_id: config.study_id, seq, created: true })
    }

    pub fn register_rater(&self, study_id: &str, req: RegisterRater) -> Result<Ingested, ServiceError> {
        let study = self.study(study_id)?;
        let mut s = lock(&study);
        let added = match s.register_rater(&req.rater_id, req.role)? {
            Some(ev) => {
                self.commit(&mut s, ev)?;
                1
            }
            None => 0,
        };
        Ok(Ingested { added, last_seq: s.log.len() as u64 })
    }

    /// Checks the whole batch against a scratch copy first so a bad item
    /// leaves the log untouched.
    fn ingest<T>(
        &self,
        study_id: &str,
        items: Vec<T>,
        decide: impl Fn(&Study, &T) -> Result<Option<Event>, ServiceError>,
    ) -> Result<Ingested, ServiceError> {
        let study = self.study(study_id)?;
        let mut s = lock(&study);
        let mut scratch = s.clone();
        let mut events = Vec::new();
        for item in &items {
            if let Some(ev) = decide(&scratch, item)? {
                let rec = EventRecord { study_id: study_id.to_string(), seq: scratch.next_seq(), timestamp_ms: 0, event: ev.clone() };
                scratch.apply(rec)?;
                events.push(ev);
            }
        }
        let added = events.len();
        for ev in events {
            self.commit(&mut s, ev)?;
        }
        Ok(Ingested { added, last_seq: s.log.len() as u64 })
    }

    pub fn add_cases(&self, study_id: &str, cases: Vec<CaseRecord>) -> Result<Ingested, ServiceError> {
        self.ingest(study_id, cases, |s, c| s.add_case(c))
    }

    pub fn add_reports(&self, study_id: &str, reports: Vec<Report>) -> Result<Ingested, ServiceError> {
        self.ingest(study_id, reports, |s, r| s.add_report(r))
    }

    pub fn next_task(&self, study_id: &str, rater_id: &str) -> Result<Option<RatingTask>, ServiceError> {
        let study = self.study(study_id)?;
        let mut s = lock(&study);
        let (task, event) = s.next_task(rater_id)?;
        if let Some(ev) = event {
            self.commit(&mut s, ev)?;
        }
        Ok(task)
    }

    pub fn submit(&self, task_id: &str, submission: &Submission) -> Result<SubmissionAck, ServiceError> {
        let study_id = self
            .inner
            .tasks
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(task_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))?;
        let study = self.study(&study_id)?;
        let mut s = lock(&study);
        let event = s.submit(task_id, submission)?;
        let stored = match &event {
            Event::AnnotationSubmitted { annotations, .. } => annotations.len(),
            _ => 0,
        };
        let seq = self.commit(&mut s, event)?;
        Ok(SubmissionAck { task_id: task_id.to_string(), stored, seq })
    }

    pub fn results(&self, study_id: &str) -> Result<StudyResults, ServiceError> {
        let study = self.study(study_id)?;
        // Aggregate over a snapshot so raters are not blocked meanwhile.
        let snapshot = lock(&study).clone();
        snapshot.results()
    }

    pub fn export(&self, study_id: &str) -> Result<Vec<EventRecord>, ServiceError> {
        let study = self.study(study_id)?;
        let log = lock(&study).log.clone();
        Ok(log)
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn create_study(
    State(app): State<AppState>,
    payload: Result<Json<CreateStudy>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let created = app.create_study(body(payload)?)?;
    let status = if created.created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(created)).into_response())
}

async fn register_rater(
    State(app): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<RegisterRater>, JsonRejection>,
) -> Result<Json<Ingested>, ServiceError> {
    Ok(Json(app.register_rater(&id, body(payload)?)?))
}

async fn add_cases(
    State(app): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<OneOrMany<CaseRecord>>, JsonRejection>,
) -> Result<Json<Ingested>, ServiceError> {
    Ok(Json(app.add_cases(&id, body(payload)?.into_vec())?))
}

async fn add_reports(
    State(app): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<OneOrMany<Report>>, JsonRejection>,
) -> Result<Json<Ingested>, ServiceError> {
    Ok(Json(app.add_reports(&id, body(payload)?.into_vec())?))
}

#[derive(Debug, Deserialize)]
struct RaterQuery {
    rater: String,
}

async fn next_task(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RaterQuery>,
) -> Result<Response, ServiceError> {
    Ok(match app.next_task(&id, &q.rater)? {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn submit(
    State(app): State<AppState>,
    Path(task_id): Path<String>,
    payload: Result<Json<Submission>, JsonRejection>,
) -> Result<Json<SubmissionAck>, ServiceError> {
    Ok(Json(app.submit(&task_id, &body(payload)?)?))
}

async fn results(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let r = app.results(&id)?;
    let bytes = serde_json::to_vec(&r).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn export(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let log = app.export(&id)?;
    let mut out = Vec::new();
    crb_core::jsonl::write_records(&mut out, &log).map_err(|e| ServiceError::Storage(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response())
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(health))
        .route("/studies", post(create_study))
        .route("/studies/{id}/raters", post(register_rater))
        .route("/studies/{id}/cases", post(add_cases))
        .route("/studies/{id}/reports", post(add_reports))
        .route("/studies/{id}/tasks/next", get(next_task))
        .route("/tasks/{id}/annotation", post(submit))
        .route("/studies/{id}/results", get(results))
        .route("/studies/{id}/export", get(export))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Large enough for a few thousand bilingual reports in one batch.
pub const MAX_BODY_BYTES: usize = 64 << 20;

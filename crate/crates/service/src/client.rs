//! Blocking HTTP client for the study endpoints. Used by scripted ingestion,
//! the examples and the tests; the rater UI talks to the same routes.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crb_core::model::{CaseRecord, RaterRole, Report};

use crate::api::{CreateStudy, Ingested, RegisterRater, StudyCreated, SubmissionAck};
use crate::error::ErrorBody;
use crate::study::{RatingTask, StudyResults, Submission};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("HTTP {status}: {}", body.as_ref().map(|b| b.message.as_str()).unwrap_or("<no body>"))]
    Http { status: u16, body: Option<ErrorBody> },
    #[error("transport: {0}")]
    Transport(String),
    #[error("decode: {0}")]
    Decode(String),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Http { status, .. } => Some(*status),
            _ => None,
        }
    }

    /// The service's error code, e.g. "RankNotPermutation".
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Http { body: Some(b), .. } => Some(&b.error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    agent: ureq::Agent,
}

fn transport(e: ureq::Error) -> ClientError {
    ClientError::Transport(e.to_string())
}

impl Client {
    /// `base` like "http://127.0.0.1:8080", no trailing slash.
    pub fn new(base: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { base: base.into().trim_end_matches('/').to_string(), agent }
    }

    fn finish(mut resp: ureq::http::Response<ureq::Body>) -> Result<(u16, Vec<u8>), ClientError> {
        let status = resp.status().as_u16();
        let bytes = resp.body_mut().with_config().limit(u64::MAX).read_to_vec().map_err(transport)?;
        Ok((status, bytes))
    }

    /// Raw GET; any status is returned rather than turned into an error.
    pub fn get_raw(&self, path: &str) -> Result<(u16, Vec<u8>), ClientError> {
        let resp = self.agent.get(format!("{}{path}", self.base)).call().map_err(transport)?;
        Self::finish(resp)
    }

    /// Raw POST of a JSON body.
    pub fn post_raw(&self, path: &str, body: &[u8]) -> Result<(u16, Vec<u8>), ClientError> {
        let resp = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body)
            .map_err(transport)?;
        Self::finish(resp)
    }

    fn decode<T: DeserializeOwned>((status, bytes): (u16, Vec<u8>)) -> Result<T, ClientError> {
        if !(200..300).contains(&status) {
            return Err(ClientError::Http { status, body: serde_json::from_slice(&bytes).ok() });
        }
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        let bytes = serde_json::to_vec(body).map_err(|e| ClientError::Decode(e.to_string()))?;
        Self::decode(self.post_raw(path, &bytes)?)
    }

    pub fn create_study(&self, req: &CreateStudy) -> Result<StudyCreated, ClientError> {
        self.post("/studies", req)
    }

    pub fn register_rater(&self, study_id: &str, rater_id: &str, role: RaterRole) -> Result<Ingested, ClientError> {
        self.post(&format!("/studies/{study_id}/raters"), &RegisterRater { rater_id: rater_id.to_string(), role })
    }

    pub fn add_cases(&self, study_id: &str, cases: &[CaseRecord]) -> Result<Ingested, ClientError> {
        self.post(&format!("/studies/{study_id}/cases"), &cases)
    }

    pub fn add_reports(&self, study_id: &str, reports: &[Report]) -> Result<Ingested, ClientError> {
        self.post(&format!("/studies/{study_id}/reports"), &reports)
    }

    /// None once the rater has nothing left to do.
    pub fn next_task(&self, study_id: &str, rater_id: &str) -> Result<Option<RatingTask>, ClientError> {
        let resp = self
            .agent
            .get(format!("{}/studies/{study_id}/tasks/next", self.base))
            .query("rater", rater_id)
            .call()
            .map_err(transport)?;
        let (status, bytes) = Self::finish(resp)?;
        if status == 204 {
            return Ok(None);
        }
        Self::decode((status, bytes)).map(Some)
    }

    pub fn submit(&self, task_id: &str, submission: &Submission) -> Result<SubmissionAck, ClientError> {
        self.post(&format!("/tasks/{task_id}/annotation"), submission)
    }

    /// The results payload exactly as served.
    pub fn results_bytes(&self, study_id: &str) -> Result<Vec<u8>, ClientError> {
        let (status, bytes) = self.get_raw(&format!("/studies/{study_id}/results"))?;
        if status != 200 {
            return Err(ClientError::Http { status, body: serde_json::from_slice(&bytes).ok() });
        }
        Ok(bytes)
    }

    pub fn results(&self, study_id: &str) -> Result<StudyResults, ClientError> {
        Self::decode(self.get_raw(&format!("/studies/{study_id}/results"))?)
    }

    /// The event log as JSONL.
    pub fn export(&self, study_id: &str) -> Result<Vec<u8>, ClientError> {
        let (status, bytes) = self.get_raw(&format!("/studies/{study_id}/export"))?;
        if status != 200 {
            return Err(ClientError::Http { status, body: serde_json::from_slice(&bytes).ok() });
        }
        Ok(bytes)
    }
}

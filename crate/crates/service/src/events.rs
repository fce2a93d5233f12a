//! The append-only event log. Study state is rebuilt by folding these in
//! order; nothing else mutates it.

use serde::{Deserialize, Serialize};

use crb_core::human_eval::Annotation;
use crb_core::model::{Arm, CaseRecord, RaterRole, Report, StudyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    StudyCreated,
    RaterRegistered,
    CaseAdded,
    ReportAdded,
    TaskIssued,
    AnnotationSubmitted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedTask {
    pub task_id: String,
    pub rater_id: String,
    pub case_id: String,
    /// (alias, arm) in presentation order.
    pub aliases: Vec<(String, Arm)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    StudyCreated(StudyConfig),
    RaterRegistered { rater_id: String, role: RaterRole },
    CaseAdded(CaseRecord),
    ReportAdded(Report),
    TaskIssued(IssuedTask),
    AnnotationSubmitted { task_id: String, annotations: Vec<Annotation> },
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self {
            Event::StudyCreated(_) => EventKind::StudyCreated,
            Event::RaterRegistered { .. } => EventKind::RaterRegistered,
            Event::CaseAdded(_) => EventKind::CaseAdded,
            Event::ReportAdded(_) => EventKind::ReportAdded,
            Event::TaskIssued(_) => EventKind::TaskIssued,
            Event::AnnotationSubmitted { .. } => EventKind::AnnotationSubmitted,
        }
    }
}

/// One log line: `{"study_id", "seq", "timestamp_ms", "kind", "payload"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub study_id: String,
    /// 1-based and gapless within a study.
    pub seq: u64,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub event: Event,
}

pub fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trips_with_flat_kind_and_payload() {
        let rec = EventRecord {
            study_id: "s1".into(),
            seq: 3,
            timestamp_ms: 17,
            event: Event::RaterRegistered { rater_id: "r1".into(), role: RaterRole::Clinician },
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            line,
            r#"{"study_id":"s1","seq":3,"timestamp_ms":17,"kind":"rater_registered","payload":{"rater_id":"r1","role":"clinician"}}"#
        );
        assert_eq!(serde_json::from_str::<EventRecord>(&line).unwrap(), rec);
        assert_eq!(rec.event.kind(), EventKind::RaterRegistered);
    }
}

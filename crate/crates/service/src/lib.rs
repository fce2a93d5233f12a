//! HTTP service hosting blinded report-rating studies.
//!
//! Every mutation is an event appended to a per-study log (one JSONL file
//! per study under the data directory) and then folded into an in-memory
//! snapshot. Restarting on the same directory, or on a copy of an exported
//! log, rebuilds the same state and the same results payload.
//!
//! Endpoints:
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/studies` | create (idempotent on identical config) |
//! | POST | `/studies/{id}/raters` | register a rater with a role |
//! | POST | `/studies/{id}/cases` | add one case or a list |
//! | POST | `/studies/{id}/reports` | add one report or a list |
//! | GET | `/studies/{id}/tasks/next?rater=R` | next blinded task, 204 when done |
//! | POST | `/tasks/{id}/annotation` | submit ranks, scores and errors |
//! | GET | `/studies/{id}/results` | aggregates over the current log |
//! | GET | `/studies/{id}/export` | the full event log as JSONL |

pub mod api;
pub mod blinding;
pub mod client;
pub mod error;
pub mod simulate;
pub mod events;
pub mod store;
pub mod study;

use std::net::SocketAddr;
use std::path::PathBuf;

pub use api::{router, AppState, CreateStudy, Ingested, RegisterRater, StudyCreated, SubmissionAck};
pub use client::{Client, ClientError};
pub use error::{ErrorBody, ServiceError};
pub use events::{Event, EventKind, EventRecord};
pub use store::LogStore;
pub use study::{AliasRating, Candidate, RatingTask, ReportBody, StudyResults, Submission};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub data_dir: Option<PathBuf>,
    /// Used for studies created without their own blinding seed.
    pub blinding_seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { addr: SocketAddr::from(([127, 0, 0, 1], 8080)), data_dir: Some(PathBuf::from("crb-data")), blinding_seed: 0 }
    }
}

impl ServiceConfig {
    /// Reads CRB_ADDR, CRB_DATA_DIR and CRB_BLINDING_SEED over the defaults.
    pub fn from_env() -> Result<Self, String> {
        let mut c = Self::default();
        if let Ok(a) = std::env::var("CRB_ADDR") {
            c.addr = a.parse().map_err(|e| format!("CRB_ADDR={a}: {e}"))?;
        }
        if let Ok(d) = std::env::var("CRB_DATA_DIR") {
            c.data_dir = Some(PathBuf::from(d));
        }
        if let Ok(s) = std::env::var("CRB_BLINDING_SEED") {
            c.blinding_seed = s.parse().map_err(|e| format!("CRB_BLINDING_SEED={s}: {e}"))?;
        }
        Ok(c)
    }

    pub fn open_state(&self) -> Result<AppState, ServiceError> {
        AppState::open(LogStore::new(self.data_dir.clone())?, self.blinding_seed)
    }
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = config.open_state()?;
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|e| ServiceError::Storage(format!("bind {}: {e}", config.addr)))?;
    tracing::info!(addr = %config.addr, data_dir = ?config.data_dir, "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Storage(e.to_string()))
}

/// A server on an ephemeral local port, running on its own thread until
/// dropped. Meant for tests, examples and local tooling.
pub struct BackgroundServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(state: AppState) -> std::io::Result<Self> {
        let std_listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(4)
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
                let _ = axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        });
        Ok(Self { addr, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

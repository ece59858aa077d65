//! Session persistence: an append-only event log per session plus a
//! workspace directory holding the session's artifacts.
//!
//! On disk, each session is a directory:
//!
//! ```text
//! <root>/<session id>/events.jsonl   one JSON object per line, with "v" and "ts"
//! <root>/<session id>/workspace/     kernel working dir; artifacts live here
//! ```

mod fs;
mod record;

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use self::fs::FsSessionStore;
pub use record::{InterventionRecord, MessageEntry, SessionRecord, TurnRecord};

use crate::error::Result;
use crate::kernel::Artifact;
use crate::llm::Role;
use crate::orchestrator::{AttemptTrace, TurnEvent, TurnOutcome};
use crate::profiler::DatasetProfile;

pub const LOG_VERSION: u32 = 1;

/// Everything that can happen to a session. A [`SessionRecord`] is the fold
/// of its events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        id: String,
    },
    Message {
        role: Role,
        text: String,
    },
    DatasetAttached {
        path: String,
        profile: Option<DatasetProfile>,
    },
    ArtifactSaved {
        artifact: Artifact,
    },
    TurnStarted {
        turn: usize,
        instruction: String,
        #[serde(default)]
        knowledge_id: Option<String>,
    },
    TurnEvent {
        turn: usize,
        /// Index into the turn's interventions; `None` for the turn itself.
        #[serde(default)]
        intervention: Option<usize>,
        event: TurnEvent,
    },
    TurnCompleted {
        turn: usize,
        traces: Vec<AttemptTrace>,
        outcome: Option<TurnOutcome>,
        error: Option<String>,
    },
    InterventionStarted {
        turn: usize,
        code: String,
    },
    InterventionCompleted {
        turn: usize,
        outcome: Option<TurnOutcome>,
        error: Option<String>,
    },
    /// The kernel lost its state (restart after a timeout or crash).
    KernelReset {
        reason: String,
    },
    /// The programmer has been told about the last reset.
    KernelResetAcknowledged,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub v: u32,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub created_at: DateTime<Utc>,
}

/// Pluggable session persistence. The workspace must be a local directory
/// because the kernel runs inside it.
pub trait SessionStore: Send + Sync {
    fn create_session(&self) -> Result<String>;
    fn load_session(&self, id: &str) -> Result<SessionRecord>;
    fn load_events(&self, id: &str) -> Result<Vec<LoggedEvent>>;
    fn append_event(&self, id: &str, event: SessionEvent) -> Result<()>;
    /// Writes a new artifact; a name already used in the session is a conflict.
    fn save_artifact(&self, id: &str, name: &str, bytes: &[u8]) -> Result<Artifact>;
    /// Registers a file the kernel already wrote into the workspace.
    fn record_artifact(&self, id: &str, artifact: Artifact) -> Result<()>;
    fn read_artifact(&self, id: &str, name: &str) -> Result<Vec<u8>>;
    fn list_sessions(&self) -> Result<Vec<SessionSummary>>;
    fn workspace_dir(&self, id: &str) -> Result<PathBuf>;
}

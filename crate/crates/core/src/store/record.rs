use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{LoggedEvent, SessionEvent};
use crate::agents::{DialogueHistory, HistoryTurn};
use crate::kernel::Artifact;
use crate::llm::Role;
use crate::orchestrator::{AttemptTrace, TurnEvent, TurnOutcome, TurnStatus};
use crate::profiler::DatasetProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageEntry {
    pub role: Role,
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub code: String,
    pub events: Vec<TurnEvent>,
    pub outcome: Option<TurnOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub index: usize,
    pub instruction: String,
    pub knowledge_id: Option<String>,
    pub traces: Vec<AttemptTrace>,
    pub events: Vec<TurnEvent>,
    /// `None` while running, or when the turn aborted with `error`.
    pub outcome: Option<TurnOutcome>,
    pub error: Option<String>,
    pub interventions: Vec<InterventionRecord>,
}

impl TurnRecord {
    /// The outcome that currently stands: the latest completed
    /// intervention's, else the turn's.
    pub fn effective_outcome(&self) -> Option<&TurnOutcome> {
        self.interventions.iter().rev().find_map(|iv| iv.outcome.as_ref()).or(self.outcome.as_ref())
    }

    pub fn effective_status(&self) -> Option<TurnStatus> {
        self.effective_outcome().map(|o| o.status)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub dataset_path: Option<String>,
    pub dataset_profile: Option<DatasetProfile>,
    pub messages: Vec<MessageEntry>,
    pub turns: Vec<TurnRecord>,
    pub artifacts: Vec<Artifact>,
    /// A kernel reset happened that the programmer has not been told about.
    pub state_reset_pending: bool,
}

impl SessionRecord {
    pub fn empty(id: &str, created_at: DateTime<Utc>) -> Self {
        Self {
            id: id.to_string(),
            created_at,
            dataset_path: None,
            dataset_profile: None,
            messages: Vec::new(),
            turns: Vec::new(),
            artifacts: Vec::new(),
            state_reset_pending: false,
        }
    }

    /// Folds a log into a record. The first event must be `Created`.
    pub fn from_events(events: &[LoggedEvent]) -> Option<SessionRecord> {
        let (first, rest) = events.split_first()?;
        let SessionEvent::Created { id } = &first.event else { return None };
        let mut record = SessionRecord::empty(id, first.ts);
        for e in rest {
            record.apply(e);
        }
        Some(record)
    }

    pub fn apply(&mut self, logged: &LoggedEvent) {
        match &logged.event {
            SessionEvent::Created { .. } => {}
            SessionEvent::Message { role, text } => {
                self.messages.push(MessageEntry { role: *role, text: text.clone(), timestamp: logged.ts })
            }
            SessionEvent::DatasetAttached { path, profile } => {
                self.dataset_path = Some(path.clone());
                self.dataset_profile = profile.clone();
            }
            SessionEvent::ArtifactSaved { artifact } => {
                self.artifacts.retain(|a| a.name != artifact.name);
                self.artifacts.push(artifact.clone());
            }
            SessionEvent::TurnStarted { turn, instruction, knowledge_id } => self.turns.push(TurnRecord {
                index: *turn,
                instruction: instruction.clone(),
                knowledge_id: knowledge_id.clone(),
                traces: Vec::new(),
                events: Vec::new(),
                outcome: None,
                error: None,
                interventions: Vec::new(),
            }),
            SessionEvent::TurnEvent { turn, intervention, event } => {
                if let Some(t) = self.turn_mut(*turn) {
                    match intervention {
                        None => t.events.push(event.clone()),
                        Some(i) => {
                            if let Some(iv) = t.interventions.get_mut(*i) {
                                iv.events.push(event.clone());
                            }
                        }
                    }
                }
            }
            SessionEvent::TurnCompleted { turn, traces, outcome, error } => {
                if let Some(t) = self.turn_mut(*turn) {
                    t.traces = traces.clone();
                    t.outcome = outcome.clone();
                    t.error = error.clone();
                }
            }
            SessionEvent::InterventionStarted { turn, code } => {
                if let Some(t) = self.turn_mut(*turn) {
                    t.interventions.push(InterventionRecord {
                        code: code.clone(),
                        events: Vec::new(),
                        outcome: None,
                        error: None,
                    });
                }
            }
            SessionEvent::InterventionCompleted { turn, outcome, error } => {
                if let Some(iv) = self.turn_mut(*turn).and_then(|t| t.interventions.last_mut()) {
                    iv.outcome = outcome.clone();
                    iv.error = error.clone();
                }
            }
            SessionEvent::KernelReset { .. } => self.state_reset_pending = true,
            SessionEvent::KernelResetAcknowledged => self.state_reset_pending = false,
        }
    }

    fn turn_mut(&mut self, index: usize) -> Option<&mut TurnRecord> {
        self.turns.iter_mut().find(|t| t.index == index)
    }

    pub fn last_turn(&self) -> Option<&TurnRecord> {
        self.turns.last()
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }

    /// Completed turns in the shape the report writer consumes.
    pub fn dialogue_history(&self) -> DialogueHistory {
        let turns = self
            .turns
            .iter()
            .filter_map(|t| {
                let outcome = t.effective_outcome()?;
                let mut artifacts: Vec<String> = Vec::new();
                let executions = t
                    .events
                    .iter()
                    .chain(t.interventions.iter().flat_map(|iv| iv.events.iter()))
                    .filter(|e| e.kind == crate::orchestrator::TurnEventKind::ExecutionResult);
                for e in executions {
                    if let Some(list) = e.payload.get("new_artifacts").and_then(|v| v.as_array()) {
                        for name in list.iter().filter_map(|a| a.get("name").and_then(|n| n.as_str())) {
                            if !artifacts.iter().any(|x| x == name) {
                                artifacts.push(name.to_string());
                            }
                        }
                    }
                }
                Some(HistoryTurn {
                    instruction: t.instruction.clone(),
                    code: outcome.final_code.clone(),
                    execution_summary: outcome.execution.as_ref().map(|r| match &r.traceback {
                        Some(tb) => format!("{}\n{}", r.stdout, crate::agents::tail_chars(tb, 1000)),
                        None => crate::agents::tail_chars(&r.stdout, 4000).to_string(),
                    }),
                    response: outcome.response_text.clone(),
                    artifacts,
                })
            })
            .collect();
        DialogueHistory { turns }
    }
}

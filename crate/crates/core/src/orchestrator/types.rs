use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::kernel::ExecuteResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    /// Maximum number of inspector-guided repair rounds.
    pub max_attempts: u32,
    #[serde(with = "crate::kernel::secs")]
    pub execute_timeout: Duration,
    /// A reply without a code block goes back to the user unchanged.
    pub return_raw_reply_when_no_code: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self { max_attempts: 5, execute_timeout: Duration::from_secs(120), return_raw_reply_when_no_code: true }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.max_attempts == 0 {
            return Err(crate::Error::Config("max_attempts must be at least 1".into()));
        }
        if self.execute_timeout.is_zero() {
            return Err(crate::Error::Config("execute_timeout must be positive".into()));
        }
        if !self.return_raw_reply_when_no_code {
            return Err(crate::Error::Config("return_raw_reply_when_no_code cannot be disabled".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStatus {
    Ok,
    NeedsIntervention,
    PlainReply,
}

/// Result of one instruction (or one human intervention) through the loop.
///
/// `Ok` carries a successful execution; `NeedsIntervention` means every
/// repair round was spent; `PlainReply` carries no code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub status: TurnStatus,
    pub attempts_used: u32,
    pub final_code: Option<String>,
    pub execution: Option<ExecuteResult>,
    pub response_text: String,
}

/// One programmer attempt within a turn. Iteration 0 is the first answer;
/// later iterations carry the inspector suggestion that prompted them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptTrace {
    pub iteration: u32,
    pub code: String,
    pub error: Option<String>,
    pub suggestion: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnEventKind {
    AgentText,
    Code,
    ExecutionResult,
    Suggestion,
    FinalResponse,
    NeedsIntervention,
    Error,
}

impl TurnEventKind {
    pub fn is_terminal(self) -> bool {
        matches!(self, TurnEventKind::FinalResponse | TurnEventKind::NeedsIntervention | TurnEventKind::Error)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TurnEventKind::AgentText => "agent_text",
            TurnEventKind::Code => "code",
            TurnEventKind::ExecutionResult => "execution_result",
            TurnEventKind::Suggestion => "suggestion",
            TurnEventKind::FinalResponse => "final_response",
            TurnEventKind::NeedsIntervention => "needs_intervention",
            TurnEventKind::Error => "error",
        }
    }
}

/// An observable step of a turn, streamed to clients and logged for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnEvent {
    pub seq: u64,
    pub kind: TurnEventKind,
    pub payload: serde_json::Value,
}

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{ChatMessage, ModelBackend};
use crate::error::{Error, Result};

/// Decides whether a scripted step answers a given request. Matching looks
/// at the content of the last message in the request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Any,
    Contains(String),
}

impl Matcher {
    fn matches(&self, messages: &[ChatMessage]) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Contains(needle) => {
                messages.last().is_some_and(|m| m.content.contains(needle.as_str()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptReply {
    Text(String),
    /// Simulates a backend outage for this call.
    Fail(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub matcher: Matcher,
    pub reply: ScriptReply,
}

impl ScriptStep {
    pub fn any(reply: impl Into<String>) -> Self {
        Self { matcher: Matcher::Any, reply: ScriptReply::Text(reply.into()) }
    }

    pub fn on(needle: impl Into<String>, reply: impl Into<String>) -> Self {
        Self { matcher: Matcher::Contains(needle.into()), reply: ScriptReply::Text(reply.into()) }
    }

    pub fn fail(cause: impl Into<String>) -> Self {
        Self { matcher: Matcher::Any, reply: ScriptReply::Fail(cause.into()) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedTranscript {
    pub steps: Vec<ScriptStep>,
    /// When set, every step must be consumed exactly once, in order.
    #[serde(default)]
    pub strict: bool,
}

impl ScriptedTranscript {
    pub fn strict(steps: Vec<ScriptStep>) -> Self {
        Self { steps, strict: true }
    }

    pub fn lenient(steps: Vec<ScriptStep>) -> Self {
        Self { steps, strict: false }
    }
}

#[derive(Debug, Default)]
struct ScriptState {
    cursor: usize,
    calls: Vec<Vec<ChatMessage>>,
    violations: Vec<String>,
}

/// Deterministic backend replaying a [`ScriptedTranscript`]. Every request
/// is captured so tests can inspect the prompts the agents produced.
#[derive(Debug)]
pub struct ScriptedBackend {
    transcript: ScriptedTranscript,
    state: Mutex<ScriptState>,
}

impl ScriptedBackend {
    pub fn new(transcript: ScriptedTranscript) -> Self {
        Self { transcript, state: Mutex::new(ScriptState::default()) }
    }

    /// A lenient backend that answers every call with `reply`.
    pub fn constant(reply: impl Into<String>) -> Self {
        Self::new(ScriptedTranscript::lenient(vec![ScriptStep::any(reply)]))
    }

    pub fn call_count(&self) -> usize {
        self.state.lock().calls.len()
    }

    pub fn calls(&self) -> Vec<Vec<ChatMessage>> {
        self.state.lock().calls.clone()
    }

    /// Content of the last message of every captured call, in order.
    pub fn prompts(&self) -> Vec<String> {
        self.state
            .lock()
            .calls
            .iter()
            .map(|c| c.last().map(|m| m.content.clone()).unwrap_or_default())
            .collect()
    }

    /// Strict mode: fails if calls arrived out of order or steps remain.
    pub fn verify(&self) -> Result<()> {
        let state = self.state.lock();
        if let Some(v) = state.violations.first() {
            return Err(Error::Model(format!("script violated: {v}")));
        }
        if self.transcript.strict && state.cursor < self.transcript.steps.len() {
            return Err(Error::Model(format!(
                "script left {} step(s) unconsumed",
                self.transcript.steps.len() - state.cursor
            )));
        }
        Ok(())
    }

    fn reply(step: &ScriptStep) -> Result<String> {
        match &step.reply {
            ScriptReply::Text(t) => Ok(t.clone()),
            ScriptReply::Fail(cause) => Err(Error::Model(cause.clone())),
        }
    }
}

impl ModelBackend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let mut state = self.state.lock();
        state.calls.push(messages.to_vec());
        let call_no = state.calls.len();
        if self.transcript.strict {
            let Some(step) = self.transcript.steps.get(state.cursor) else {
                let msg = format!("call {call_no} arrived after the script was exhausted");
                state.violations.push(msg.clone());
                return Err(Error::Model(msg));
            };
            if !step.matcher.matches(messages) {
                let msg = format!("call {call_no} does not match step {}: {:?}", state.cursor, step.matcher);
                state.violations.push(msg.clone());
                return Err(Error::Model(msg));
            }
            state.cursor += 1;
            Self::reply(step)
        } else {
            match self.transcript.steps.iter().find(|s| s.matcher.matches(messages)) {
                Some(step) => Self::reply(step),
                None => Err(Error::Model(format!("no scripted step matches call {call_no}"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ask(text: &str) -> Vec<ChatMessage> {
        vec![ChatMessage::system("sys"), ChatMessage::user(text)]
    }

    #[test]
    fn matcher_hit_returns_reply_verbatim() {
        let b = ScriptedBackend::new(ScriptedTranscript::lenient(vec![
            ScriptStep::on("weather", "sunny"),
            ScriptStep::any("fallback"),
        ]));
        assert_eq!(b.complete(&ask("what's the weather")).unwrap(), "sunny");
        assert_eq!(b.complete(&ask("hello")).unwrap(), "fallback");
        assert_eq!(b.call_count(), 2);
    }

    #[test]
    fn strict_order_is_enforced() {
        let b = ScriptedBackend::new(ScriptedTranscript::strict(vec![
            ScriptStep::on("first", "1"),
            ScriptStep::on("second", "2"),
        ]));
        assert!(b.complete(&ask("second")).is_err());
        assert!(b.verify().is_err());
    }

    #[test]
    fn strict_unconsumed_steps_fail_verification() {
        let b = ScriptedBackend::new(ScriptedTranscript::strict(vec![
            ScriptStep::any("a"),
            ScriptStep::any("b"),
        ]));
        b.complete(&ask("x")).unwrap();
        assert!(b.verify().is_err());
        b.complete(&ask("y")).unwrap();
        b.verify().unwrap();
        assert!(b.complete(&ask("z")).is_err());
        assert!(b.verify().is_err());
    }

    #[test]
    fn fail_step_surfaces_model_error() {
        let b = ScriptedBackend::new(ScriptedTranscript::strict(vec![ScriptStep::fail("down")]));
        assert!(matches!(b.complete(&ask("x")), Err(Error::Model(_))));
        b.verify().unwrap();
    }

    #[test]
    fn input_messages_are_not_mutated() {
        let b = ScriptedBackend::constant("ok");
        let msgs = ask("hi");
        let before = msgs.clone();
        b.complete(&msgs).unwrap();
        assert_eq!(msgs, before);
    }
}

//! The programmer/inspector self-correction loop with a human escape hatch.
//!
//! A turn runs: programmer answer, code extraction, execution, and while the
//! execution fails and fewer than `max_attempts` repairs were made, an
//! inspector suggestion followed by a programmer repair and re-execution.
//! Every observable step is emitted as a [`TurnEvent`] and appended to the
//! session log before it reaches the caller's sink.

mod types;

use std::sync::Arc;

use serde_json::json;
use tracing::warn;

pub use types::{AttemptTrace, LoopConfig, TurnEvent, TurnEventKind, TurnOutcome, TurnStatus};

use crate::agents::{
    build_inspector_prompt, build_knowledge_prompt, build_programmer_system_prompt, build_repair_prompt,
    build_summary_prompt, extract_code_blocks, PromptContext, PromptSet,
};
use crate::error::{Error, Result};
use crate::kernel::{ExecuteResult, Kernel, KernelState};
use crate::knowledge::{Embedder, KnowledgeBase};
use crate::llm::{ChatMessage, ModelBackend, Role};
use crate::store::{SessionEvent, SessionRecord, SessionStore};

/// Prepended to raw stdout when the summary call fails.
pub const FALLBACK_PREFIX: &str =
    "The code ran successfully, but a written summary could not be generated. Raw output:\n\n";

const NO_CODE_ERROR: &str = "NoCodeBlock: the programmer's reply contained no fenced code block";

/// Knowledge lookup performed before the programmer's first answer.
#[derive(Clone)]
pub struct KnowledgeHook {
    pub base: Arc<KnowledgeBase>,
    pub embedder: Arc<dyn Embedder>,
    pub threshold: f64,
}

pub struct Orchestrator {
    pub programmer: Arc<dyn ModelBackend>,
    pub inspector: Arc<dyn ModelBackend>,
    pub prompts: Arc<PromptSet>,
    pub config: LoopConfig,
    pub knowledge: Option<KnowledgeHook>,
}

/// Assigns sequence numbers, persists each event, then forwards it.
struct Emitter<'a> {
    store: &'a dyn SessionStore,
    session_id: &'a str,
    turn: usize,
    intervention: Option<usize>,
    seq: u64,
    sink: &'a mut dyn FnMut(&TurnEvent),
}

impl Emitter<'_> {
    fn emit(&mut self, kind: TurnEventKind, payload: serde_json::Value) -> Result<()> {
        let event = TurnEvent { seq: self.seq, kind, payload };
        self.seq += 1;
        self.store.append_event(
            self.session_id,
            SessionEvent::TurnEvent { turn: self.turn, intervention: self.intervention, event: event.clone() },
        )?;
        (self.sink)(&event);
        Ok(())
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Model(_) => "model_error",
        Error::Kernel(_) | Error::KernelStart(_) | Error::KernelProtocol(_) => "kernel_error",
        _ => "internal_error",
    }
}

/// The final answer for a successful execution; on backend failure, a
/// fixed framing sentence plus the raw output.
pub fn compose_final_response(prompts: &PromptSet, code: &str, result: &ExecuteResult, backend: &dyn ModelBackend) -> String {
    let artifacts: Vec<String> = result.new_artifacts.iter().map(|a| a.name.clone()).collect();
    let messages = [
        ChatMessage::system(prompts.programmer_role.clone()),
        ChatMessage::user(build_summary_prompt(prompts, code, &result.stdout, &artifacts)),
    ];
    match backend.complete(&messages) {
        Ok(text) => text,
        Err(e) => {
            warn!(error = %e, "summary generation failed, returning raw output");
            let out = if result.stdout.is_empty() { "(no output)" } else { result.stdout.as_str() };
            format!("{FALLBACK_PREFIX}{out}")
        }
    }
}

fn execution_payload(iteration: Option<u32>, r: &ExecuteResult) -> serde_json::Value {
    let mut v = serde_json::to_value(r).unwrap_or_else(|_| json!({}));
    if let (Some(obj), Some(i)) = (v.as_object_mut(), iteration) {
        obj.insert("iteration".into(), json!(i));
    }
    v
}

impl Orchestrator {
    fn check_kernel(kernel: &Kernel) -> Result<()> {
        match kernel.state() {
            KernelState::Ready => Ok(()),
            other => Err(Error::Precondition(format!("kernel is {other:?}; a turn may already be running"))),
        }
    }

    /// Executes code, records new artifacts and a reset marker if the kernel
    /// restarted. Protocol faults count as a failed execution.
    fn execute(&self, store: &dyn SessionStore, session_id: &str, kernel: &Kernel, code: &str) -> Result<ExecuteResult> {
        let result = match kernel.execute(code, self.config.execute_timeout) {
            Ok(r) => r,
            Err(Error::KernelProtocol(detail)) => ExecuteResult {
                status: crate::kernel::ExecStatus::Error,
                stdout: String::new(),
                stderr: String::new(),
                traceback: Some(format!("KernelProtocolError: {detail}; the kernel was restarted and its state reset")),
                wall_time: std::time::Duration::ZERO,
                new_artifacts: Vec::new(),
                kernel_restarted: true,
            },
            Err(e @ Error::Precondition(_)) => return Err(Error::Kernel(e.to_string())),
            Err(e) => return Err(e),
        };
        let known = store.load_session(session_id)?;
        for artifact in &result.new_artifacts {
            if known.artifact(&artifact.name).is_none() {
                store.record_artifact(session_id, artifact.clone())?;
            }
        }
        if result.kernel_restarted {
            let reason = result.traceback.clone().unwrap_or_default();
            store.append_event(session_id, SessionEvent::KernelReset { reason })?;
        }
        Ok(result)
    }

    fn programmer_messages(&self, record: &SessionRecord, kernel: &Kernel) -> Vec<ChatMessage> {
        let mut ctx = PromptContext::new(
            kernel.working_dir().display().to_string(),
            record.dataset_profile.clone(),
            &self.prompts,
        );
        ctx.state_reset_notice = record.state_reset_pending;
        let mut messages = vec![ChatMessage::system(build_programmer_system_prompt(&ctx))];
        messages.extend(
            record
                .messages
                .iter()
                .filter(|m| m.role != Role::System && !m.text.is_empty())
                .map(|m| ChatMessage { role: m.role, content: m.text.clone() }),
        );
        messages
    }

    /// Runs one instruction through the loop.
    pub fn run_turn(
        &self,
        store: &dyn SessionStore,
        kernel: &Kernel,
        session_id: &str,
        instruction: &str,
        sink: &mut dyn FnMut(&TurnEvent),
    ) -> Result<TurnOutcome> {
        if instruction.trim().is_empty() {
            return Err(Error::Precondition("instruction is empty".into()));
        }
        let record = store.load_session(session_id)?;
        Self::check_kernel(kernel)?;
        self.config.validate()?;

        let mut user_content = instruction.to_string();
        let mut knowledge_id = None;
        if let Some(hook) = &self.knowledge {
            match hook.base.match_instruction(instruction, hook.threshold, hook.embedder.as_ref()) {
                Ok(m) => {
                    if let Some(hit) = m.matched {
                        let demos: Vec<_> = self.prompts.demos.iter().filter(|d| d.knowledge.is_some()).cloned().collect();
                        user_content = build_knowledge_prompt(&self.prompts, instruction, &hit.entry.code, &demos);
                        knowledge_id = Some(hit.entry.id);
                    }
                }
                Err(e) => warn!(error = %e, "knowledge matching failed; continuing without knowledge"),
            }
        }

        let turn = record.turns.len();
        let mut messages = self.programmer_messages(&record, kernel);
        store.append_event(session_id, SessionEvent::TurnStarted { turn, instruction: instruction.into(), knowledge_id })?;
        store.append_event(session_id, SessionEvent::Message { role: Role::User, text: instruction.into() })?;
        if record.state_reset_pending {
            store.append_event(session_id, SessionEvent::KernelResetAcknowledged)?;
        }
        messages.push(ChatMessage::user(user_content));

        let mut emitter = Emitter { store, session_id, turn, intervention: None, seq: 0, sink };
        let mut traces = Vec::new();
        let result = self.drive(store, kernel, session_id, &mut messages, &mut traces, &mut emitter);
        match result {
            Ok((outcome, assistant_text)) => {
                store.append_event(session_id, SessionEvent::Message { role: Role::Assistant, text: assistant_text })?;
                store.append_event(
                    session_id,
                    SessionEvent::TurnCompleted { turn, traces, outcome: Some(outcome.clone()), error: None },
                )?;
                Ok(outcome)
            }
            Err(e) => {
                let _ = emitter.emit(TurnEventKind::Error, json!({ "kind": error_kind(&e), "message": e.to_string() }));
                store.append_event(
                    session_id,
                    SessionEvent::TurnCompleted { turn, traces, outcome: None, error: Some(e.to_string()) },
                )?;
                Err(e)
            }
        }
    }

    /// The loop proper. Returns the outcome and the assistant message to
    /// keep in the conversation.
    fn drive(
        &self,
        store: &dyn SessionStore,
        kernel: &Kernel,
        session_id: &str,
        messages: &mut Vec<ChatMessage>,
        traces: &mut Vec<AttemptTrace>,
        emitter: &mut Emitter<'_>,
    ) -> Result<(TurnOutcome, String)> {
        let reply = self.programmer.complete(messages)?;
        emitter.emit(TurnEventKind::AgentText, json!({ "iteration": 0, "text": reply }))?;
        let parsed = extract_code_blocks(&reply);
        let Some(mut code) = parsed.combined_code() else {
            let outcome = TurnOutcome {
                status: TurnStatus::PlainReply,
                attempts_used: 0,
                final_code: None,
                execution: None,
                response_text: reply.clone(),
            };
            emitter.emit(TurnEventKind::FinalResponse, json!({ "text": reply, "code": null }))?;
            return Ok((outcome, reply));
        };
        messages.push(ChatMessage::assistant(reply));

        traces.push(AttemptTrace { iteration: 0, code: code.clone(), error: None, suggestion: None });
        emitter.emit(TurnEventKind::Code, json!({ "iteration": 0, "code": code }))?;
        let mut result = self.execute(store, session_id, kernel, &code)?;
        emitter.emit(TurnEventKind::ExecutionResult, execution_payload(Some(0), &result))?;

        let mut n = 0u32;
        while !result.is_success() && n < self.config.max_attempts {
            let error = result.error_text();
            traces[n as usize].error = Some(error.clone());
            n += 1;

            let inspector_messages = [
                ChatMessage::system(self.prompts.inspector_role.clone()),
                ChatMessage::user(build_inspector_prompt(&self.prompts, &code, &error)),
            ];
            let suggestion = self.inspector.complete(&inspector_messages)?;
            emitter.emit(TurnEventKind::Suggestion, json!({ "iteration": n, "text": suggestion }))?;

            messages.push(ChatMessage::user(build_repair_prompt(&self.prompts, &code, &suggestion, &error)));
            let reply = self.programmer.complete(messages)?;
            emitter.emit(TurnEventKind::AgentText, json!({ "iteration": n, "text": reply }))?;
            let parsed = extract_code_blocks(&reply);
            messages.push(ChatMessage::assistant(reply));

            match parsed.combined_code() {
                Some(next) => {
                    code = next;
                    traces.push(AttemptTrace { iteration: n, code: code.clone(), error: None, suggestion: Some(suggestion) });
                    emitter.emit(TurnEventKind::Code, json!({ "iteration": n, "code": code }))?;
                    result = self.execute(store, session_id, kernel, &code)?;
                }
                None => {
                    // Nothing to run: the attempt fails without touching the kernel.
                    code = String::new();
                    traces.push(AttemptTrace { iteration: n, code: String::new(), error: None, suggestion: Some(suggestion) });
                    result = ExecuteResult {
                        status: crate::kernel::ExecStatus::Error,
                        stdout: String::new(),
                        stderr: String::new(),
                        traceback: Some(NO_CODE_ERROR.into()),
                        wall_time: std::time::Duration::ZERO,
                        new_artifacts: Vec::new(),
                        kernel_restarted: false,
                    };
                }
            }
            emitter.emit(TurnEventKind::ExecutionResult, execution_payload(Some(n), &result))?;
        }

        if result.is_success() {
            let response = compose_final_response(&self.prompts, &code, &result, self.programmer.as_ref());
            emitter.emit(TurnEventKind::FinalResponse, json!({ "text": response, "code": code }))?;
            let assistant = format!("```python\n{code}\n```\n\n{response}");
            let outcome = TurnOutcome {
                status: TurnStatus::Ok,
                attempts_used: n,
                final_code: Some(code),
                execution: Some(result),
                response_text: response,
            };
            Ok((outcome, assistant))
        } else {
            let error = result.error_text();
            if let Some(last) = traces.last_mut() {
                last.error = Some(error.clone());
            }
            let response = format!(
                "The code still fails after {n} correction attempt(s). You can edit the code and run it yourself.\n\nLast error:\n{}",
                crate::agents::tail_chars(&error, 2000)
            );
            emitter.emit(
                TurnEventKind::NeedsIntervention,
                json!({ "code": code, "error": error, "attempts_used": n, "text": response }),
            )?;
            let outcome = TurnOutcome {
                status: TurnStatus::NeedsIntervention,
                attempts_used: n,
                final_code: Some(code),
                execution: Some(result),
                response_text: response.clone(),
            };
            Ok((outcome, response))
        }
    }

    /// Runs code supplied by a person after the loop gave up. There is no
    /// cap on how often this may be retried.
    pub fn apply_human_intervention(
        &self,
        store: &dyn SessionStore,
        kernel: &Kernel,
        session_id: &str,
        human_code: &str,
        sink: &mut dyn FnMut(&TurnEvent),
    ) -> Result<TurnOutcome> {
        let record = store.load_session(session_id)?;
        let last = record.last_turn().ok_or_else(|| Error::Precondition("session has no turns".into()))?;
        if last.effective_status() != Some(TurnStatus::NeedsIntervention) {
            return Err(Error::Precondition("the last turn does not need intervention".into()));
        }
        if human_code.trim().is_empty() {
            return Err(Error::Precondition("intervention code is empty".into()));
        }
        Self::check_kernel(kernel)?;
        let attempts_used = last.effective_outcome().map_or(0, |o| o.attempts_used);
        let turn = last.index;
        let intervention = last.interventions.len();

        store.append_event(session_id, SessionEvent::InterventionStarted { turn, code: human_code.into() })?;
        store.append_event(
            session_id,
            SessionEvent::Message { role: Role::User, text: format!("I ran this code myself:\n```python\n{human_code}\n```") },
        )?;
        let mut emitter = Emitter { store, session_id, turn, intervention: Some(intervention), seq: 0, sink };
        let outcome = self.drive_intervention(store, kernel, session_id, human_code, attempts_used, &mut emitter);
        match outcome {
            Ok(outcome) => {
                store.append_event(session_id, SessionEvent::Message { role: Role::Assistant, text: outcome.response_text.clone() })?;
                store.append_event(
                    session_id,
                    SessionEvent::InterventionCompleted { turn, outcome: Some(outcome.clone()), error: None },
                )?;
                Ok(outcome)
            }
            Err(e) => {
                let _ = emitter.emit(TurnEventKind::Error, json!({ "kind": error_kind(&e), "message": e.to_string() }));
                store.append_event(
                    session_id,
                    SessionEvent::InterventionCompleted { turn, outcome: None, error: Some(e.to_string()) },
                )?;
                Err(e)
            }
        }
    }

    fn drive_intervention(
        &self,
        store: &dyn SessionStore,
        kernel: &Kernel,
        session_id: &str,
        code: &str,
        attempts_used: u32,
        emitter: &mut Emitter<'_>,
    ) -> Result<TurnOutcome> {
        emitter.emit(TurnEventKind::Code, json!({ "iteration": null, "code": code, "human": true }))?;
        let result = self.execute(store, session_id, kernel, code)?;
        emitter.emit(TurnEventKind::ExecutionResult, execution_payload(None, &result))?;
        if result.is_success() {
            let response = compose_final_response(&self.prompts, code, &result, self.programmer.as_ref());
            emitter.emit(TurnEventKind::FinalResponse, json!({ "text": response, "code": code }))?;
            Ok(TurnOutcome {
                status: TurnStatus::Ok,
                attempts_used,
                final_code: Some(code.to_string()),
                execution: Some(result),
                response_text: response,
            })
        } else {
            let error = result.error_text();
            let response = format!("Your code failed as well.\n\nError:\n{}", crate::agents::tail_chars(&error, 2000));
            emitter.emit(
                TurnEventKind::NeedsIntervention,
                json!({ "code": code, "error": error, "attempts_used": attempts_used, "text": response }),
            )?;
            Ok(TurnOutcome {
                status: TurnStatus::NeedsIntervention,
                attempts_used,
                final_code: Some(code.to_string()),
                execution: Some(result),
                response_text: response,
            })
        }
    }
}

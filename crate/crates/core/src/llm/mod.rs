//! Chat-completion backends.
//!
//! Every agent role talks to a model through [`ModelBackend`]. Two
//! implementations ship: [`OpenAiClient`] for OpenAI-style HTTP endpoints and
//! [`ScriptedBackend`] for deterministic tests.

mod openai;
mod scripted;
mod tokens;

use serde::{Deserialize, Serialize};

pub use openai::{OpenAiClient, RetryPolicy};
pub use scripted::{Matcher, ScriptReply, ScriptStep, ScriptedBackend, ScriptedTranscript};
pub use tokens::{count_tokens, ApproxTokenCounter, TokenCounter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Endpoint settings for an OpenAI-style chat-completions server.
///
/// The API key is never stored here; only the name of the environment
/// variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub api_key_env_var: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_retries: u32,
    /// Seconds.
    pub request_timeout: f64,
}

impl Default for ModelEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".to_string(),
            model_name: "default".to_string(),
            api_key_env_var: "OPENAI_API_KEY".to_string(),
            temperature: 0.6,
            top_p: 0.9,
            max_retries: 3,
            request_timeout: 120.0,
        }
    }
}

impl ModelEndpointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if !(self.request_timeout > 0.0) {
            return Err(Error::Config("request_timeout must be positive".into()));
        }
        if self.base_url.trim().is_empty() {
            return Err(Error::Config("base_url is empty".into()));
        }
        Ok(())
    }
}

/// Anything that can turn a message list into an assistant reply.
pub trait ModelBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String>;
}

impl<T: ModelBackend + ?Sized> ModelBackend for std::sync::Arc<T> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        (**self).complete(messages)
    }
}

impl<T: ModelBackend + ?Sized> ModelBackend for &T {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        (**self).complete(messages)
    }
}

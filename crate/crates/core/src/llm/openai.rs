use std::time::Duration;

use serde::Deserialize;
use serde_json::json;
use tracing::warn;

use super::{ChatMessage, ModelBackend, ModelEndpointConfig};
use crate::error::{Error, Result};

/// Backoff schedule between retried requests.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { base_delay: Duration::from_millis(500), max_delay: Duration::from_secs(8) }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based): base * 2^(attempt-1), capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Debug, Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retryable(String),
    Fatal(String),
}

/// Blocking client for `POST {base_url}/chat/completions`.
pub struct OpenAiClient {
    cfg: ModelEndpointConfig,
    retry: RetryPolicy,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl std::fmt::Debug for OpenAiClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiClient")
            .field("base_url", &self.cfg.base_url)
            .field("model", &self.cfg.model_name)
            .field("has_api_key", &self.api_key.is_some())
            .finish()
    }
}

impl OpenAiClient {
    pub fn new(cfg: ModelEndpointConfig) -> Result<Self> {
        cfg.validate()?;
        let api_key = std::env::var(&cfg.api_key_env_var).ok().filter(|k| !k.is_empty());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.request_timeout)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { cfg, retry: RetryPolicy::default(), agent, api_key })
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &ModelEndpointConfig {
        &self.cfg
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let mut req = self.agent.post(self.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(resp) => resp,
            // Transport failures (refused, reset, timeout) are retried.
            Err(e) => return Attempt::Retryable(format!("transport: {e}")),
        };
        let status = resp.status().as_u16();
        if status >= 500 || status == 429 {
            return Attempt::Retryable(format!("HTTP {status}"));
        }
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(format!("HTTP {status}: {}", truncate(&text, 500)));
        }
        match resp.body_mut().read_json::<CompletionBody>() {
            Ok(parsed) => match parsed.choices.into_iter().next() {
                Some(choice) => Attempt::Done(choice.message.content.unwrap_or_default()),
                None => Attempt::Fatal("response has no choices".into()),
            },
            Err(e) => Attempt::Fatal(format!("malformed response body: {e}")),
        }
    }
}

fn truncate(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

impl ModelBackend for OpenAiClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        if messages.is_empty() {
            return Err(Error::Model("empty message list".into()));
        }
        let body = json!({
            "model": self.cfg.model_name,
            "messages": messages,
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
            "stream": false,
        });
        let mut retries = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(cause) => return Err(Error::Model(cause)),
                Attempt::Retryable(cause) => {
                    if retries >= self.cfg.max_retries {
                        return Err(Error::Model(format!(
                            "giving up after {} attempts: {cause}",
                            retries + 1
                        )));
                    }
                    retries += 1;
                    warn!(%cause, retry = retries, "chat completion failed, retrying");
                    std::thread::sleep(self.retry.delay(retries));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy { base_delay: Duration::from_millis(100), max_delay: Duration::from_millis(350) };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(350));
        assert_eq!(p.delay(40), Duration::from_millis(350));
    }

    #[test]
    fn config_rejects_out_of_range_sampling() {
        let cfg = ModelEndpointConfig { temperature: 2.5, ..Default::default() };
        assert!(matches!(OpenAiClient::new(cfg), Err(Error::Config(_))));
        let cfg = ModelEndpointConfig { top_p: 0.0, ..Default::default() };
        assert!(matches!(OpenAiClient::new(cfg), Err(Error::Config(_))));
    }
}

//! Stateful execution kernels: one long-lived shim process per session.

mod artifact;
mod manager;
mod process;
pub mod protocol;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use artifact::{Artifact, ArtifactKind};
pub use manager::KernelManager;
pub use process::{Kernel, KernelState};

/// Source of the shim script shipped with the crate.
pub const SHIM_SOURCE: &str = include_str!("../../shim/kernel_shim.py");

pub const TIMEOUT_TRACEBACK: &str = "ExecutionTimeout";
pub const TRUNCATION_MARKER: &str = "\n[truncated]";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    /// Interpreter used to run the shim.
    pub python: String,
    /// Overrides the embedded shim script.
    pub shim_path: Option<PathBuf>,
    #[serde(with = "secs")]
    pub handshake_timeout: Duration,
    /// Per-stream byte cap applied to stdout and stderr.
    pub output_limit: usize,
    #[serde(with = "secs")]
    pub shutdown_timeout: Duration,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            python: "python3".to_string(),
            shim_path: None,
            handshake_timeout: Duration::from_secs(10),
            output_limit: 64 * 1024,
            shutdown_timeout: Duration::from_secs(5),
        }
    }
}

pub(crate) mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(serde::de::Error::custom("duration must be a non-negative number of seconds"));
        }
        Ok(Duration::from_secs_f64(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecStatus {
    Success,
    Error,
}

/// Outcome of one execute request. `status == Error` exactly when a
/// traceback is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecuteResult {
    pub status: ExecStatus,
    pub stdout: String,
    pub stderr: String,
    pub traceback: Option<String>,
    pub wall_time: Duration,
    pub new_artifacts: Vec<Artifact>,
    /// The kernel was restarted while serving this request; earlier state is gone.
    #[serde(default)]
    pub kernel_restarted: bool,
}

impl ExecuteResult {
    pub fn is_success(&self) -> bool {
        self.status == ExecStatus::Success
    }

    /// Error text handed to the inspector: traceback plus captured stderr.
    pub fn error_text(&self) -> String {
        let mut text = self.traceback.clone().unwrap_or_default();
        if !self.stderr.trim().is_empty() && !text.contains(self.stderr.trim()) {
            text = format!("{}\n{text}", self.stderr.trim_end());
        }
        text
    }
}

/// Keeps at most `limit` bytes (cut on a char boundary) and appends the
/// truncation marker when anything was dropped.
pub fn truncate_output(text: String, limit: usize) -> String {
    if text.len() <= limit {
        return text;
    }
    let mut cut = limit;
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    let mut out = text[..cut].to_string();
    out.push_str(TRUNCATION_MARKER);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_marks_and_respects_boundaries() {
        assert_eq!(truncate_output("abc".into(), 3), "abc");
        assert_eq!(truncate_output("abcd".into(), 3), format!("abc{TRUNCATION_MARKER}"));
        // 'é' is two bytes; a cut at 1 must back off to 0.
        assert_eq!(truncate_output("éa".into(), 1), TRUNCATION_MARKER);
    }
}

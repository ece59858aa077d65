use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the orchestration library.
///
/// Variants line up with the error kinds the service reports over HTTP, so
/// a handler can map each one to a status code without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model backend error: {0}")]
    Model(String),

    #[error("embedding failed: {0}")]
    Embed(String),

    #[error("kernel failed to start: {0}")]
    KernelStart(String),

    #[error("kernel protocol error: {0}")]
    KernelProtocol(String),

    #[error("kernel error: {0}")]
    Kernel(String),

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("ingest error at line {line}: {message}")]
    IngestLine { line: u64, message: String },

    #[error("profile error: {0}")]
    Profile(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("dialogue history has no completed turn")]
    EmptyHistory,

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },

    #[error("degenerate (all-zero) vector")]
    DegenerateVector,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("template error in {path}: {message}")]
    Template { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

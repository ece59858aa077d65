//! Conversational data analysis with a programmer agent, an inspector agent
//! and a persistent Python kernel.

pub mod agents;
pub mod config;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod knowledge;
pub mod llm;
pub mod orchestrator;
pub mod profiler;
pub mod report;
pub mod server;
pub mod store;

pub use error::{Error, Result};

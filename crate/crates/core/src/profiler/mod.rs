//! Tabular dataset ingestion and profiling.
//!
//! The profile feeds the programmer's system prompt: dimensions, column names
//! and types, missing counts and a statistical description.

mod ingest;
mod profile;
mod render;

pub use ingest::{detect_delimiter, ingest_csv, is_missing_token, IngestOptions, Table, MISSING_TOKENS};
pub use profile::{
    profile, profile_with, ColumnProfile, ColumnStats, ColumnType, DatasetProfile, NumericStats,
    ProfileOptions,
};
pub use render::render_profile_text;

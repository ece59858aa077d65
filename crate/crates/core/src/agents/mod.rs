//! Prompt assembly for the programmer, inspector, knowledge and report
//! roles, and parsing of model replies.

mod parse;
mod prompts;
mod templates;

pub use parse::{extract_code_blocks, ParsedReply};
pub use prompts::{
    build_inspector_prompt, build_knowledge_prompt, build_plain_query_prompt, build_programmer_system_prompt,
    build_repair_prompt, build_report_prompt, build_summary_prompt, tail_chars, DialogueHistory, HistoryTurn,
    PromptContext, ERROR_TAIL_CHARS,
};
pub use templates::{render, Demo, PromptSet};

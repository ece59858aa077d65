use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::templates::{render, Demo, PromptSet};
use crate::error::{Error, Result};
use crate::profiler::{render_profile_text, DatasetProfile};
use crate::report::ReportTemplate;

/// Error text handed to the inspector keeps only this many trailing chars.
pub const ERROR_TAIL_CHARS: usize = 4000;

/// The last `n` characters of `text`.
pub fn tail_chars(text: &str, n: usize) -> &str {
    let count = text.chars().count();
    if count <= n {
        return text;
    }
    let (idx, _) = text.char_indices().nth(count - n).expect("index within bounds");
    &text[idx..]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub working_dir: String,
    /// `None` selects the no-dataset variant of the system prompt.
    pub dataset_profile: Option<DatasetProfile>,
    pub role_preamble: String,
    pub io_format_rules: String,
    pub few_shot_demos: Vec<Demo>,
    /// Set after a kernel restart so the programmer knows earlier variables are gone.
    #[serde(default)]
    pub state_reset_notice: bool,
}

impl PromptContext {
    pub fn new(working_dir: impl Into<String>, profile: Option<DatasetProfile>, prompts: &PromptSet) -> Self {
        Self {
            working_dir: working_dir.into(),
            dataset_profile: profile,
            role_preamble: prompts.programmer_role.clone(),
            io_format_rules: prompts.io_format.clone(),
            few_shot_demos: prompts.demos.clone(),
            state_reset_notice: false,
        }
    }
}

fn push_demo(out: &mut String, i: usize, demo: &Demo) {
    let _ = writeln!(out, "### Example {}", i + 1);
    let _ = writeln!(out, "User: {}", demo.query);
    if let Some(k) = &demo.knowledge {
        let _ = writeln!(out, "Knowledge:\n```python\n{k}\n```");
    }
    let _ = writeln!(out, "Assistant:\n{}\n", demo.answer);
}

pub fn build_programmer_system_prompt(ctx: &PromptContext) -> String {
    let mut out = String::new();
    out.push_str(ctx.role_preamble.trim_end());
    out.push_str("\n\n## Environment\n");
    let _ = writeln!(out, "Working directory: {}", ctx.working_dir);
    match &ctx.dataset_profile {
        Some(profile) => {
            let _ = writeln!(out, "Dataset path: {}", profile.path);
            let _ = writeln!(out, "Dataset dimensions: {} rows x {} columns", profile.n_rows, profile.n_cols);
            out.push_str("\n## Dataset profile\n");
            out.push_str(&render_profile_text(profile));
        }
        None => out.push_str("No dataset has been uploaded yet.\n"),
    }
    if ctx.state_reset_notice {
        out.push_str(
            "\nNote: the kernel was restarted since the last turn. Variables, imports and loaded data from \
             earlier turns are gone and must be recreated.\n",
        );
    }
    out.push_str("\n## Input/output format\n");
    out.push_str(ctx.io_format_rules.trim_end());
    out.push('\n');
    if !ctx.few_shot_demos.is_empty() {
        out.push_str("\n## Examples\n");
        for (i, demo) in ctx.few_shot_demos.iter().enumerate() {
            push_demo(&mut out, i, demo);
        }
    }
    out
}

fn must_render(template: &str, vars: &[(&str, &str)]) -> String {
    // Templates are validated at load time by the tests below; a custom
    // template with an unknown placeholder degrades to an inline note.
    render(template, vars).unwrap_or_else(|e| format!("{template}\n\n[template error: {e}]"))
}

/// Inspector request: the failing code and the tail of its error output.
pub fn build_inspector_prompt(prompts: &PromptSet, code: &str, error: &str) -> String {
    must_render(&prompts.inspector, &[("code", code), ("error", tail_chars(error, ERROR_TAIL_CHARS))])
}

/// Programmer repair request pairing the previous code, the error and the
/// inspector's suggestion.
pub fn build_repair_prompt(prompts: &PromptSet, prev_code: &str, suggestion: &str, error: &str) -> String {
    must_render(
        &prompts.repair,
        &[("code", prev_code), ("suggestion", suggestion), ("error", tail_chars(error, ERROR_TAIL_CHARS))],
    )
}

/// Asks the programmer for the final natural-language answer after a
/// successful execution.
pub fn build_summary_prompt(prompts: &PromptSet, code: &str, stdout: &str, artifacts: &[String]) -> String {
    let output = if stdout.trim().is_empty() { "(execution succeeded, no output)" } else { stdout };
    let artifacts = if artifacts.is_empty() {
        String::new()
    } else {
        format!("Files produced: {}\n\n", artifacts.join(", "))
    };
    must_render(&prompts.summary, &[("code", code), ("output", output), ("artifacts", &artifacts)])
}

fn push_demos_section(out: &mut String, demos: &[Demo]) {
    if demos.is_empty() {
        return;
    }
    out.push_str("## Demonstrations\n\n");
    for (i, demo) in demos.iter().enumerate() {
        push_demo(out, i, demo);
    }
}

/// In-context prompt ordered demonstrations, then knowledge, then query.
pub fn build_knowledge_prompt(prompts: &PromptSet, query: &str, knowledge_code: &str, demos: &[Demo]) -> String {
    let mut out = String::new();
    out.push_str(prompts.knowledge_preamble.trim_end());
    out.push_str("\n\n");
    push_demos_section(&mut out, demos);
    out.push_str("## Knowledge\n\n```python\n");
    out.push_str(knowledge_code);
    out.push_str("\n```\n\n## Query\n\n");
    out.push_str(query);
    out.push('\n');
    out
}

/// The same layout without a knowledge section, used when nothing matched.
pub fn build_plain_query_prompt(query: &str, demos: &[Demo]) -> String {
    let mut out = String::new();
    push_demos_section(&mut out, demos);
    out.push_str("## Query\n\n");
    out.push_str(query);
    out.push('\n');
    out
}

/// One completed turn as the report writer sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub instruction: String,
    pub code: Option<String>,
    pub execution_summary: Option<String>,
    pub response: String,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogueHistory {
    pub turns: Vec<HistoryTurn>,
}

pub fn build_report_prompt(prompts: &PromptSet, history: &DialogueHistory, template: &ReportTemplate) -> Result<String> {
    if history.turns.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut out = String::new();
    out.push_str(prompts.report_role.trim_end());
    let _ = write!(out, "\n\n# Report template: {}\n\nWrite one section per heading, in this order:\n\n", template.name);
    for section in &template.sections {
        let _ = writeln!(out, "## {}\n{}\n", section.header, section.guidance.trim());
    }
    out.push_str("# Conversation history\n");
    for (i, turn) in history.turns.iter().enumerate() {
        let _ = writeln!(out, "\n## Turn {}\nInstruction: {}", i + 1, turn.instruction);
        if let Some(code) = &turn.code {
            let _ = writeln!(out, "Code:\n```python\n{code}\n```");
        }
        if let Some(summary) = &turn.execution_summary {
            let _ = writeln!(out, "Execution output:\n```\n{summary}\n```");
        }
        if !turn.artifacts.is_empty() {
            let _ = writeln!(out, "Files produced: {}", turn.artifacts.join(", "));
        }
        let _ = writeln!(out, "Answer: {}", turn.response);
    }
    out.push_str("\nWrite the report now, in Markdown, using the section headings above as `##` headings.\n");
    Ok(out)
}

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One few-shot demonstration: a query, optional reference knowledge, and
/// the expected answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demo {
    pub query: String,
    pub knowledge: Option<String>,
    pub answer: String,
}

impl Demo {
    /// Parses the demo file format: `### query`, optional `### knowledge`,
    /// and `### answer` headings, each followed by its body.
    pub fn parse(text: &str) -> std::result::Result<Demo, String> {
        let mut query = None;
        let mut knowledge = None;
        let mut answer = None;
        let mut current: Option<&str> = None;
        let mut body: Vec<&str> = Vec::new();
        let mut flush = |name: Option<&str>, body: &mut Vec<&str>| {
            let text = body.join("\n").trim_matches('\n').to_string();
            body.clear();
            match name {
                Some("query") => query = Some(text),
                Some("knowledge") => knowledge = Some(text),
                Some("answer") => answer = Some(text),
                _ => {}
            }
        };
        for line in text.lines() {
            if let Some(heading) = line.strip_prefix("### ") {
                let heading = heading.trim();
                if matches!(heading, "query" | "knowledge" | "answer") {
                    flush(current, &mut body);
                    current = Some(match heading {
                        "query" => "query",
                        "knowledge" => "knowledge",
                        _ => "answer",
                    });
                    continue;
                }
            }
            body.push(line);
        }
        flush(current, &mut body);
        match (query, answer) {
            (Some(q), Some(a)) if !q.is_empty() && !a.is_empty() => {
                Ok(Demo { query: q, knowledge: knowledge.filter(|k| !k.is_empty()), answer: a })
            }
            _ => Err("demo needs non-empty `### query` and `### answer` sections".into()),
        }
    }
}

/// Replaces `{{name}}` placeholders in one pass. Substituted values are not
/// rescanned, so braces inside code survive untouched. A placeholder with no
/// value is an error.
pub fn render(template: &str, vars: &[(&str, &str)]) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(template.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let Some(len) = rest[start + 2..].find("}}") else { break };
        let name = &rest[start + 2..start + 2 + len];
        let is_ident = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        out.push_str(&rest[..start]);
        if is_ident {
            let value = vars
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| format!("no value for placeholder {{{{{name}}}}}"))?;
            out.push_str(value);
        } else {
            out.push_str(&rest[start..start + 2 + len + 2]);
        }
        rest = &rest[start + 2 + len + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

macro_rules! builtin {
    ($name:literal) => {
        include_str!(concat!("../../templates/", $name))
    };
}

/// All prompt texts used by the agents. Defaults are compiled in; a
/// templates directory may override any of them file by file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub programmer_role: String,
    pub io_format: String,
    pub inspector_role: String,
    /// Placeholders: `code`, `error`.
    pub inspector: String,
    /// Placeholders: `code`, `error`, `suggestion`.
    pub repair: String,
    /// Placeholders: `code`, `output`, `artifacts`.
    pub summary: String,
    pub knowledge_preamble: String,
    pub report_role: String,
    pub demos: Vec<Demo>,
}

impl Default for PromptSet {
    fn default() -> Self {
        let demos = [builtin!("demos/01_describe.txt"), builtin!("demos/02_knowledge.txt")]
            .into_iter()
            .map(|t| Demo::parse(t).expect("built-in demos are well formed"))
            .collect();
        Self {
            programmer_role: builtin!("programmer_role.txt").to_string(),
            io_format: builtin!("io_format.txt").to_string(),
            inspector_role: builtin!("inspector_role.txt").to_string(),
            inspector: builtin!("inspector.txt").to_string(),
            repair: builtin!("repair.txt").to_string(),
            summary: builtin!("summary.txt").to_string(),
            knowledge_preamble: builtin!("knowledge_preamble.txt").to_string(),
            report_role: builtin!("report_role.txt").to_string(),
            demos,
        }
    }
}

impl PromptSet {
    /// Loads overrides from `dir`. Missing files keep their defaults; a
    /// `demos/` subdirectory, when present, replaces the built-in demos.
    pub fn load_dir(dir: &Path) -> Result<PromptSet> {
        let mut set = PromptSet::default();
        let slots: [(&str, &mut String); 8] = [
            ("programmer_role.txt", &mut set.programmer_role),
            ("io_format.txt", &mut set.io_format),
            ("inspector_role.txt", &mut set.inspector_role),
            ("inspector.txt", &mut set.inspector),
            ("repair.txt", &mut set.repair),
            ("summary.txt", &mut set.summary),
            ("knowledge_preamble.txt", &mut set.knowledge_preamble),
            ("report_role.txt", &mut set.report_role),
        ];
        for (file, slot) in slots {
            let path = dir.join(file);
            if path.is_file() {
                *slot = fs::read_to_string(&path)?;
            }
        }
        let demo_dir = dir.join("demos");
        if demo_dir.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(&demo_dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            files.sort();
            set.demos = files
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p)?;
                    Demo::parse(&text).map_err(|message| Error::Template { path: p.clone(), message })
                })
                .collect::<Result<_>>()?;
        }
        Ok(set)
    }
}

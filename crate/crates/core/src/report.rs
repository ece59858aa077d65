//! Markdown analysis reports generated from a session's dialogue history.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::agents::{build_report_prompt, PromptSet};
use crate::error::{Error, Result};
use crate::kernel::Artifact;
use crate::llm::{ChatMessage, ModelBackend};
use crate::store::SessionStore;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSection {
    pub header: String,
    pub guidance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportTemplate {
    pub name: String,
    pub sections: Vec<ReportSection>,
}

const STANDARD: &str = include_str!("../templates/reports/standard_analysis.txt");
pub const MISSING_SECTION_NOTICE: &str = "_This section was not generated._";

impl ReportTemplate {
    /// Parses the template file format: a `# name` line, then `## Header`
    /// lines each followed by guidance text.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut name = None;
        let mut sections: Vec<ReportSection> = Vec::new();
        for line in text.lines() {
            if let Some(h) = line.strip_prefix("## ") {
                sections.push(ReportSection { header: h.trim().to_string(), guidance: String::new() });
            } else if let Some(n) = line.strip_prefix("# ") {
                if name.is_none() && sections.is_empty() {
                    name = Some(n.trim().to_string());
                }
            } else if let Some(s) = sections.last_mut() {
                if !s.guidance.is_empty() || !line.trim().is_empty() {
                    s.guidance.push_str(line);
                    s.guidance.push('\n');
                }
            }
        }
        for s in &mut sections {
            s.guidance = s.guidance.trim_end().to_string();
        }
        let template = ReportTemplate { name: name.ok_or("missing `# name` line")?, sections };
        template.validate()?;
        Ok(template)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.sections.is_empty() {
            return Err(format!("template {} has no sections", self.name));
        }
        let mut seen = HashSet::new();
        for s in &self.sections {
            if s.header.is_empty() || !seen.insert(s.header.to_lowercase()) {
                return Err(format!("template {} has an empty or duplicate header {:?}", self.name, s.header));
            }
        }
        Ok(())
    }

    /// Data, Processing, Visualization, Model, Evaluation, Conclusions.
    pub fn standard() -> Self {
        Self::parse(STANDARD).expect("built-in template is valid")
    }

    /// The built-in template plus every `*.txt` template in `dir`.
    pub fn load_all(dir: Option<&Path>) -> Result<Vec<ReportTemplate>> {
        let mut all = vec![Self::standard()];
        let Some(dir) = dir.filter(|d| d.is_dir()) else { return Ok(all) };
        let mut files: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        for path in files {
            let text = fs::read_to_string(&path)?;
            let t = Self::parse(&text).map_err(|message| Error::Template { path: path.clone(), message })?;
            all.retain(|x| x.name != t.name);
            all.push(t);
        }
        Ok(all)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub markdown_text: String,
    pub referenced_artifacts: Vec<String>,
    pub template_name: String,
    /// Name under which the report was saved in the session.
    pub artifact_name: String,
}

fn link_regex() -> Regex {
    Regex::new(r#"(!?\[[^\]\n]*\])\(\s*<?([^)\s>]+)>?(\s+"[^"]*")?\s*\)"#).expect("valid regex")
}

fn resolve<'a>(target: &str, artifacts: &'a [Artifact]) -> Option<&'a Artifact> {
    let target = target.trim_start_matches("./");
    if let Some(a) = artifacts.iter().find(|a| a.name == target) {
        return Some(a);
    }
    for marker in ["workspace/", "artifacts/"] {
        if let Some(pos) = target.rfind(marker) {
            let rel = &target[pos + marker.len()..];
            if let Some(a) = artifacts.iter().find(|a| a.name == rel) {
                return Some(a);
            }
        }
    }
    let base = target.rsplit('/').next()?;
    let mut hits = artifacts.iter().filter(|a| a.name.rsplit('/').next() == Some(base));
    match (hits.next(), hits.next()) {
        (Some(a), None) => Some(a),
        _ => None,
    }
}

fn has_header(markdown: &str, header: &str) -> bool {
    markdown.lines().any(|l| {
        let t = l.trim_start();
        t.starts_with('#') && t.trim_start_matches('#').trim().eq_ignore_ascii_case(header)
    })
}

/// Rewrites Markdown links that point at session artifacts to the
/// artifact's relative name and appends any template section the model
/// left out. Returns the text and the referenced artifact names.
pub fn postprocess_report(markdown: &str, template: &ReportTemplate, artifacts: &[Artifact]) -> (String, Vec<String>) {
    let mut referenced: Vec<String> = Vec::new();
    let re = link_regex();
    let mut text = re
        .replace_all(markdown, |caps: &regex::Captures<'_>| {
            let label = &caps[1];
            let title = caps.get(3).map_or("", |m| m.as_str());
            match resolve(&caps[2], artifacts) {
                Some(a) => {
                    if !referenced.contains(&a.name) {
                        referenced.push(a.name.clone());
                    }
                    format!("{label}({}{title})", a.name)
                }
                None => caps[0].to_string(),
            }
        })
        .into_owned();
    for section in &template.sections {
        if !has_header(&text, &section.header) {
            if !text.ends_with('\n') {
                text.push('\n');
            }
            text.push_str(&format!("\n## {}\n\n{MISSING_SECTION_NOTICE}\n", section.header));
        }
    }
    (text, referenced)
}

/// Writes a report for the session and stores it as a Markdown artifact.
pub fn generate_report(
    prompts: &PromptSet,
    store: &dyn SessionStore,
    session_id: &str,
    template: &ReportTemplate,
    backend: &dyn ModelBackend,
) -> Result<ReportDocument> {
    template.validate().map_err(Error::Report)?;
    let record = store.load_session(session_id)?;
    let history = record.dialogue_history();
    let prompt = build_report_prompt(prompts, &history, template)?;
    let reply = backend
        .complete(&[ChatMessage::system(prompts.report_role.clone()), ChatMessage::user(prompt)])
        .map_err(|e| Error::Report(e.to_string()))?;
    let (markdown_text, referenced_artifacts) = postprocess_report(&reply, template, &record.artifacts);
    for name in &referenced_artifacts {
        let artifact = record.artifact(name).ok_or_else(|| Error::Report(format!("artifact {name} vanished")))?;
        if !artifact.path.is_file() {
            return Err(Error::Report(format!("artifact {name} is not on disk")));
        }
    }
    let artifact_name = (1..)
        .map(|n| format!("report-{n}.md"))
        .find(|n| record.artifact(n).is_none() && !artifact_exists(store, session_id, n))
        .expect("unbounded search");
    store.save_artifact(session_id, &artifact_name, markdown_text.as_bytes())?;
    Ok(ReportDocument { markdown_text, referenced_artifacts, template_name: template.name.clone(), artifact_name })
}

fn artifact_exists(store: &dyn SessionStore, id: &str, name: &str) -> bool {
    store.workspace_dir(id).map(|d| d.join(name).exists()).unwrap_or(false)
}

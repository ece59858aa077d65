use serde::{Deserialize, Serialize};

/// A model reply split into prose and fenced code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedReply {
    pub full_text: String,
    pub code_blocks: Vec<String>,
    /// Language tag of each block, aligned with `code_blocks`.
    pub languages: Vec<Option<String>>,
    pub has_code: bool,
}

impl ParsedReply {
    /// All blocks joined in order, as executed in one cell.
    pub fn combined_code(&self) -> Option<String> {
        self.has_code.then(|| self.code_blocks.join("\n"))
    }
}

const FENCE: &str = "```";

/// Extracts triple-backtick fenced regions whose fences start a line
/// (leading whitespace allowed). An unterminated final fence runs to the end
/// of the text.
pub fn extract_code_blocks(reply_text: &str) -> ParsedReply {
    let mut code_blocks = Vec::new();
    let mut languages = Vec::new();
    let mut open: Option<(Option<String>, Vec<&str>)> = None;
    for line in reply_text.lines() {
        let trimmed = line.trim_start();
        match open.as_mut() {
            None => {
                if let Some(tag) = trimmed.strip_prefix(FENCE) {
                    let tag = tag.trim();
                    let lang = (!tag.is_empty()).then(|| tag.to_string());
                    open = Some((lang, Vec::new()));
                }
            }
            Some((_, body)) => {
                if trimmed.starts_with(FENCE) && trimmed.trim_end() == FENCE {
                    let (lang, body) = open.take().expect("block is open");
                    code_blocks.push(body.join("\n"));
                    languages.push(lang);
                } else {
                    body.push(line);
                }
            }
        }
    }
    if let Some((lang, body)) = open {
        code_blocks.push(body.join("\n"));
        languages.push(lang);
    }
    ParsedReply { full_text: reply_text.to_string(), has_code: !code_blocks.is_empty(), code_blocks, languages }
}

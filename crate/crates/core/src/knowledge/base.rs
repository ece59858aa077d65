use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::{cosine_similarity, Embedder};
use crate::agents::{build_knowledge_prompt, build_plain_query_prompt, Demo, PromptSet};
use crate::error::{Error, Result};
use crate::llm::{ChatMessage, ModelBackend};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

const ENTRY_EXT: &str = "txt";
const FRONT: &str = "+++";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub id: String,
    pub description: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub entry: KnowledgeEntry,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matched: Option<ScoredEntry>,
    /// Score of every entry, in insertion order.
    pub all_scores: Vec<(String, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrontMatter {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    seq: Option<u64>,
    description: String,
}

#[derive(Debug, Clone)]
struct Stored {
    entry: KnowledgeEntry,
    seq: u64,
}

#[derive(Debug, Default)]
struct Inner {
    entries: Vec<Stored>,
    next_seq: u64,
}

/// The (description, code) store.
///
/// Optionally backed by a directory with one file per entry: a TOML front
/// matter block between `+++` lines (`id`, `seq`, `description`) followed by
/// the code body. Insertion order is the `seq` order and breaks score ties.
#[derive(Debug, Default)]
pub struct KnowledgeBase {
    dir: Option<PathBuf>,
    inner: RwLock<Inner>,
    /// (embedder id, entry id) -> description embedding.
    cache: Mutex<HashMap<(String, String), Vec<f64>>>,
}

fn fnv_desc(s: &str) -> String {
    let h = s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3));
    format!("{h:x}")
}

fn parse_entry_file(path: &Path, text: &str) -> Result<(FrontMatter, String)> {
    let bad = |message: &str| Error::Template { path: path.to_path_buf(), message: message.to_string() };
    let rest = text.strip_prefix(FRONT).and_then(|r| r.strip_prefix('\n').or_else(|| r.strip_prefix("\r\n")));
    let rest = rest.ok_or_else(|| bad("missing opening +++ line"))?;
    let mut offset = 0;
    let mut close = None;
    for line in rest.split_inclusive('\n') {
        if line.trim_end() == FRONT {
            close = Some((offset, offset + line.len()));
            break;
        }
        offset += line.len();
    }
    let (end, body_start) = close.ok_or_else(|| bad("missing closing +++ line"))?;
    let front: FrontMatter = toml::from_str(&rest[..end]).map_err(|e| bad(&e.to_string()))?;
    Ok((front, rest[body_start..].to_string()))
}

impl KnowledgeBase {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a knowledge directory and loads its entries.
    pub fn open_dir(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == ENTRY_EXT))
            .collect();
        files.sort();
        let mut loaded = Vec::new();
        let mut unsequenced = Vec::new();
        for path in files {
            let text = fs::read_to_string(&path)?;
            let (front, code) = parse_entry_file(&path, &text)?;
            let id = front
                .id
                .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default());
            if front.description.trim().is_empty() || code.trim().is_empty() {
                return Err(Error::Template { path, message: "description and code must be non-empty".into() });
            }
            let entry = KnowledgeEntry { id, description: front.description, code };
            match front.seq {
                Some(seq) => loaded.push(Stored { entry, seq }),
                None => unsequenced.push(entry),
            }
        }
        loaded.sort_by_key(|s| s.seq);
        let mut next_seq = loaded.last().map_or(1, |s| s.seq + 1);
        for entry in unsequenced {
            loaded.push(Stored { entry, seq: next_seq });
            next_seq += 1;
        }
        let mut seen = std::collections::HashSet::new();
        for s in &loaded {
            if !seen.insert(s.entry.id.clone()) {
                return Err(Error::Conflict(format!("duplicate knowledge id {}", s.entry.id)));
            }
        }
        Ok(Self { dir: Some(dir), inner: RwLock::new(Inner { entries: loaded, next_seq }), cache: Mutex::default() })
    }

    fn write_file(&self, stored: &Stored) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let front = FrontMatter {
            id: Some(stored.entry.id.clone()),
            seq: Some(stored.seq),
            description: stored.entry.description.clone(),
        };
        let header = toml::to_string(&front).map_err(|e| Error::Config(e.to_string()))?;
        let text = format!("{FRONT}\n{header}{FRONT}\n{}", stored.entry.code);
        let path = dir.join(format!("{}.{ENTRY_EXT}", stored.entry.id));
        let tmp = dir.join(format!(".{}.tmp", stored.entry.id));
        fs::write(&tmp, text)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    fn invalidate(&self, id: &str) {
        self.cache.lock().retain(|(_, entry_id), _| entry_id != id);
    }

    pub fn add_entry(&self, description: &str, code: &str) -> Result<String> {
        if description.trim().is_empty() || code.trim().is_empty() {
            return Err(Error::Precondition("knowledge description and code must be non-empty".into()));
        }
        let mut inner = self.inner.write();
        let seq = inner.next_seq.max(1);
        let mut id = format!("k{seq:05}");
        let mut bump = seq;
        while inner.entries.iter().any(|s| s.entry.id == id) {
            bump += 1;
            id = format!("k{bump:05}");
        }
        let stored = Stored { entry: KnowledgeEntry { id: id.clone(), description: description.into(), code: code.into() }, seq };
        self.write_file(&stored)?;
        inner.entries.push(stored);
        inner.next_seq = seq + 1;
        Ok(id)
    }

    pub fn update_entry(&self, id: &str, description: &str, code: &str) -> Result<()> {
        if description.trim().is_empty() || code.trim().is_empty() {
            return Err(Error::Precondition("knowledge description and code must be non-empty".into()));
        }
        let mut inner = self.inner.write();
        let stored = inner
            .entries
            .iter_mut()
            .find(|s| s.entry.id == id)
            .ok_or_else(|| Error::NotFound(format!("knowledge entry {id}")))?;
        let mut updated = stored.clone();
        updated.entry.description = description.into();
        updated.entry.code = code.into();
        self.write_file(&updated)?;
        *stored = updated;
        self.invalidate(id);
        Ok(())
    }

    pub fn remove_entry(&self, id: &str) -> Result<()> {
        let mut inner = self.inner.write();
        let pos = inner
            .entries
            .iter()
            .position(|s| s.entry.id == id)
            .ok_or_else(|| Error::NotFound(format!("knowledge entry {id}")))?;
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{id}.{ENTRY_EXT}"));
            if path.exists() {
                fs::remove_file(path)?;
            }
        }
        inner.entries.remove(pos);
        self.invalidate(id);
        Ok(())
    }

    pub fn list_entries(&self) -> Vec<KnowledgeEntry> {
        self.inner.read().entries.iter().map(|s| s.entry.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<KnowledgeEntry> {
        self.inner.read().entries.iter().find(|s| s.entry.id == id).map(|s| s.entry.clone())
    }

    pub fn len(&self) -> usize {
        self.inner.read().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn description_embedding(&self, embedder: &dyn Embedder, entry: &KnowledgeEntry) -> Result<Vec<f64>> {
        let key = (format!("{}#{}", embedder.id(), fnv_desc(&entry.description)), entry.id.clone());
        if let Some(v) = self.cache.lock().get(&key) {
            return Ok(v.clone());
        }
        let v = embedder.embed(&entry.description)?;
        self.cache.lock().insert(key, v.clone());
        Ok(v)
    }

    /// Scores every entry against `instruction` and selects the highest
    /// score strictly above `threshold`; ties go to the earliest entry.
    pub fn match_instruction(&self, instruction: &str, threshold: f64, embedder: &dyn Embedder) -> Result<MatchResult> {
        if !(-1.0..=1.0).contains(&threshold) {
            return Err(Error::Domain(format!("threshold {threshold} outside [-1, 1]")));
        }
        let snapshot = self.list_entries();
        if snapshot.is_empty() {
            return Ok(MatchResult { matched: None, all_scores: Vec::new() });
        }
        let query = embedder.embed(instruction)?;
        let mut all_scores = Vec::with_capacity(snapshot.len());
        let mut best: Option<(usize, f64)> = None;
        for (i, entry) in snapshot.iter().enumerate() {
            let e = self.description_embedding(embedder, entry)?;
            let score = cosine_similarity(&e, &query).map_err(|err| Error::Embed(format!("entry {}: {err}", entry.id)))?;
            all_scores.push((entry.id.clone(), score));
            if score > threshold && best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let matched = best.map(|(i, score)| ScoredEntry { entry: snapshot[i].clone(), score });
        Ok(MatchResult { matched, all_scores })
    }
}

/// Answers `query` in context: with the matched code as knowledge when there
/// is a match, otherwise with the demonstrations and query alone.
pub fn answer_with_knowledge(
    prompts: &PromptSet,
    query: &str,
    matched: &MatchResult,
    demos: &[Demo],
    backend: &dyn ModelBackend,
) -> Result<String> {
    let prompt = match &matched.matched {
        Some(hit) => build_knowledge_prompt(prompts, query, &hit.entry.code, demos),
        None => build_plain_query_prompt(query, demos),
    };
    backend.complete(&[ChatMessage::user(prompt)])
}

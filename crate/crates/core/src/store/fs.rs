use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;

use super::{LoggedEvent, SessionEvent, SessionRecord, SessionStore, SessionSummary, LOG_VERSION};
use crate::error::{Error, Result};
use crate::kernel::Artifact;

const LOG_FILE: &str = "events.jsonl";
const WORKSPACE: &str = "workspace";

#[derive(Default)]
struct Writer {
    last_ts: Option<DateTime<Utc>>,
}

/// Local-filesystem session store.
///
/// Log lines are appended with a single write followed by an fsync; a torn
/// trailing line (no newline) is ignored on load, so a partially written
/// event is never observed. New files are written to a temporary name and
/// renamed into place.
pub struct FsSessionStore {
    root: PathBuf,
    writers: Mutex<HashMap<String, Arc<Mutex<Writer>>>>,
}

impl std::fmt::Debug for FsSessionStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FsSessionStore").field("root", &self.root).finish()
    }
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(Error::NotFound(format!("session {id:?}")))
    }
}

/// Artifact names are relative `/`-separated paths without `.` or `..`.
pub(crate) fn check_artifact_name(name: &str) -> Result<()> {
    let path = Path::new(name);
    let ok = !name.is_empty()
        && !name.contains('\\')
        && path.components().all(|c| matches!(c, Component::Normal(_)))
        && !path.file_name().is_some_and(|f| f.to_string_lossy().starts_with('.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(format!("invalid artifact name {name:?}")))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().ok_or_else(|| Error::Precondition(format!("{} has no parent", path.display())))?;
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{}.tmp", uuid::Uuid::new_v4().simple()));
    let mut file = File::create(&tmp)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    drop(file);
    fs::rename(&tmp, path)?;
    Ok(())
}

impl FsSessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root, writers: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn session_dir(&self, id: &str) -> Result<PathBuf> {
        check_id(id)?;
        let dir = self.root.join(id);
        if !dir.join(LOG_FILE).is_file() {
            return Err(Error::NotFound(format!("session {id}")));
        }
        Ok(dir)
    }

    fn writer(&self, id: &str) -> Arc<Mutex<Writer>> {
        self.writers.lock().entry(id.to_string()).or_default().clone()
    }

    fn next_ts(&self, id: &str, w: &mut Writer) -> Result<DateTime<Utc>> {
        if w.last_ts.is_none() {
            w.last_ts = self.load_events(id)?.last().map(|e| e.ts);
        }
        let now = Utc::now();
        let ts = match w.last_ts {
            Some(last) if last > now => last,
            _ => now,
        };
        w.last_ts = Some(ts);
        Ok(ts)
    }

    fn append_locked(&self, id: &str, w: &mut Writer, event: SessionEvent) -> Result<()> {
        let dir = self.session_dir(id)?;
        let ts = self.next_ts(id, w)?;
        let mut line = serde_json::to_string(&LoggedEvent { v: LOG_VERSION, ts, event })?;
        line.push('\n');
        let mut file = OpenOptions::new().append(true).open(dir.join(LOG_FILE))?;
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }

    fn registered(&self, id: &str, name: &str) -> Result<bool> {
        Ok(self
            .load_events(id)?
            .iter()
            .any(|e| matches!(&e.event, SessionEvent::ArtifactSaved { artifact } if artifact.name == name)))
    }
}

impl SessionStore for FsSessionStore {
    fn create_session(&self) -> Result<String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.root.join(&id);
        fs::create_dir_all(dir.join(WORKSPACE))?;
        let ts = Utc::now();
        let mut line = serde_json::to_string(&LoggedEvent {
            v: LOG_VERSION,
            ts,
            event: SessionEvent::Created { id: id.clone() },
        })?;
        line.push('\n');
        write_atomic(&dir.join(LOG_FILE), line.as_bytes())?;
        self.writer(&id).lock().last_ts = Some(ts);
        Ok(id)
    }

    fn load_session(&self, id: &str) -> Result<SessionRecord> {
        let events = self.load_events(id)?;
        SessionRecord::from_events(&events)
            .ok_or_else(|| Error::Precondition(format!("session {id} log does not start with a created event")))
    }

    fn load_events(&self, id: &str) -> Result<Vec<LoggedEvent>> {
        let dir = self.session_dir(id)?;
        let text = fs::read_to_string(dir.join(LOG_FILE))?;
        let complete = match text.rfind('\n') {
            Some(end) => &text[..end],
            None => "",
        };
        complete
            .split('\n')
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str::<LoggedEvent>(l).map_err(Error::from))
            .collect()
    }

    fn append_event(&self, id: &str, event: SessionEvent) -> Result<()> {
        let writer = self.writer(id);
        let mut w = writer.lock();
        self.append_locked(id, &mut w, event)
    }

    fn save_artifact(&self, id: &str, name: &str, bytes: &[u8]) -> Result<Artifact> {
        check_artifact_name(name)?;
        let workspace = self.workspace_dir(id)?;
        let writer = self.writer(id);
        let mut w = writer.lock();
        if self.registered(id, name)? || workspace.join(name).exists() {
            return Err(Error::Conflict(format!("artifact {name} already exists")));
        }
        write_atomic(&workspace.join(name), bytes)?;
        let artifact = Artifact::new(&workspace, name);
        self.append_locked(id, &mut w, SessionEvent::ArtifactSaved { artifact: artifact.clone() })?;
        Ok(artifact)
    }

    fn record_artifact(&self, id: &str, artifact: Artifact) -> Result<()> {
        check_artifact_name(&artifact.name)?;
        let workspace = self.workspace_dir(id)?;
        if artifact.path != workspace.join(&artifact.name) {
            return Err(Error::Precondition(format!("artifact {} is outside the session workspace", artifact.name)));
        }
        let writer = self.writer(id);
        let mut w = writer.lock();
        if self.registered(id, &artifact.name)? {
            return Err(Error::Conflict(format!("artifact {} already exists", artifact.name)));
        }
        self.append_locked(id, &mut w, SessionEvent::ArtifactSaved { artifact })
    }

    fn read_artifact(&self, id: &str, name: &str) -> Result<Vec<u8>> {
        check_artifact_name(name).map_err(|_| Error::NotFound(format!("artifact {name}")))?;
        let workspace = self.workspace_dir(id)?;
        if !self.registered(id, name)? {
            return Err(Error::NotFound(format!("artifact {name}")));
        }
        fs::read(workspace.join(name)).map_err(|_| Error::NotFound(format!("artifact {name}")))
    }

    fn list_sessions(&self) -> Result<Vec<SessionSummary>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            let id = entry.file_name().to_string_lossy().to_string();
            if check_id(&id).is_err() || !entry.path().join(LOG_FILE).is_file() {
                continue;
            }
            if let Some(first) = self.load_events(&id)?.first() {
                out.push(SessionSummary { id, created_at: first.ts });
            }
        }
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        Ok(out)
    }

    fn workspace_dir(&self, id: &str) -> Result<PathBuf> {
        Ok(self.session_dir(id)?.join(WORKSPACE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Role;

    fn store() -> (tempfile::TempDir, FsSessionStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = FsSessionStore::open(dir.path()).unwrap();
        (dir, s)
    }

    #[test]
    fn create_then_load_is_empty() {
        let (_d, s) = store();
        let id = s.create_session().unwrap();
        let r = s.load_session(&id).unwrap();
        assert_eq!(r.id, id);
        assert!(r.messages.is_empty() && r.turns.is_empty() && r.artifacts.is_empty());
        assert_eq!(s.list_sessions().unwrap().len(), 1);
    }

    #[test]
    fn appended_events_reload_in_order() {
        let (_d, s) = store();
        let id = s.create_session().unwrap();
        for t in ["one", "two", "three"] {
            s.append_event(&id, SessionEvent::Message { role: Role::User, text: t.into() }).unwrap();
        }
        let r = s.load_session(&id).unwrap();
        let texts: Vec<_> = r.messages.iter().map(|m| m.text.as_str()).collect();
        assert_eq!(texts, ["one", "two", "three"]);
        assert!(r.messages.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }

    #[test]
    fn duplicate_artifact_conflicts() {
        let (_d, s) = store();
        let id = s.create_session().unwrap();
        s.save_artifact(&id, "data.csv", b"a\n1\n").unwrap();
        assert!(matches!(s.save_artifact(&id, "data.csv", b"x"), Err(Error::Conflict(_))));
        assert_eq!(s.read_artifact(&id, "data.csv").unwrap(), b"a\n1\n");
    }

    #[test]
    fn unknown_ids_and_names() {
        let (_d, s) = store();
        assert!(matches!(s.load_session("nope"), Err(Error::NotFound(_))));
        assert!(matches!(s.load_session("../etc"), Err(Error::NotFound(_))));
        let id = s.create_session().unwrap();
        assert!(matches!(s.read_artifact(&id, "missing.png"), Err(Error::NotFound(_))));
        assert!(matches!(s.read_artifact(&id, "../events.jsonl"), Err(Error::NotFound(_))));
        assert!(s.save_artifact(&id, "../escape.txt", b"x").is_err());
        assert!(s.save_artifact(&id, "/abs.txt", b"x").is_err());
    }

    #[test]
    fn torn_trailing_line_is_invisible() {
        let (_d, s) = store();
        let id = s.create_session().unwrap();
        s.append_event(&id, SessionEvent::Message { role: Role::User, text: "kept".into() }).unwrap();
        let log = s.root().join(&id).join(LOG_FILE);
        let mut f = OpenOptions::new().append(true).open(&log).unwrap();
        f.write_all(br#"{"v":1,"ts":"2024-01-01T00:00:00Z","kind":"mess"#).unwrap();
        let r = s.load_session(&id).unwrap();
        assert_eq!(r.messages.len(), 1);
    }

    #[test]
    fn artifact_names() {
        assert!(check_artifact_name("plot1.png").is_ok());
        assert!(check_artifact_name("out/clean.csv").is_ok());
        for bad in ["", "../x", "a/../b", "/x", ".hidden", "a\\b", "./x"] {
            assert!(check_artifact_name(bad).is_err(), "{bad}");
        }
    }
}

//! Sessions persisted as append-only JSONL event logs, one file per session.
//!
//! Every mutation is expressed as a [`SessionEvent`]; the live path and the
//! startup replay both go through [`Session::apply`], so a replayed session
//! is identical to the one that wrote the log. Sanitized snippet requests are
//! logged too whenever they add vault entries, which makes placeholder tokens
//! handed out before a restart resolve afterwards.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use intentrank_core::IntentSpec;
use intentrank_svg::{show_full_svg, PayloadVault, SvgDocument};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

const MAX_SESSION_ID_LEN: usize = 64;

pub fn check_session_id(id: &str) -> Result<(), ServiceError> {
    let ok = !id.is_empty()
        && id.len() <= MAX_SESSION_ID_LEN
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(ServiceError::InvalidSessionId(id.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VersionSource {
    Original,
    Stitch,
    Propose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Searched {
        query: Option<String>,
        spec: IntentSpec,
        top_ids: Vec<String>,
        at: DateTime<Utc>,
    },
    /// Ids appended to the committed list, already deduplicated.
    Committed {
        record_ids: Vec<String>,
        at: DateTime<Utc>,
    },
    Removed {
        record_ids: Vec<String>,
        at: DateTime<Utc>,
    },
    SvgOpened {
        record_id: String,
        text: String,
        at: DateTime<Utc>,
    },
    SvgShown {
        record_id: String,
        node_id: String,
        at: DateTime<Utc>,
    },
    SvgStitched {
        record_id: String,
        source: VersionSource,
        edited_nodes: Vec<String>,
        text: String,
        at: DateTime<Utc>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub query: Option<String>,
    pub spec: IntentSpec,
    pub top_ids: Vec<String>,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvgVersion {
    /// 0 is the record's original SVG; stitched outputs count up from 1.
    pub version: u32,
    pub created_at: DateTime<Utc>,
    pub source: VersionSource,
    pub document_hash: String,
    pub edited_nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgSession {
    pub versions: Vec<SvgVersion>,
    texts: Vec<String>,
    pub vault: PayloadVault,
}

impl SvgSession {
    pub fn current(&self) -> SvgDocument {
        SvgDocument::parse(self.texts.last().expect("opened with a version").clone()).expect("stored versions parse")
    }

    pub fn text(&self, version: u32) -> Option<&str> {
        self.texts.get(version as usize).map(String::as_str)
    }

    pub fn latest(&self) -> &SvgVersion {
        self.versions.last().expect("opened with a version")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub current_spec: Option<IntentSpec>,
    pub committed: Vec<String>,
    pub svg_sessions: BTreeMap<String, SvgSession>,
    pub history: Vec<HistoryEntry>,
    payload_threshold: usize,
}

impl Session {
    pub fn new(session_id: &str, payload_threshold: usize) -> Self {
        Session {
            session_id: session_id.to_string(),
            current_spec: None,
            committed: Vec::new(),
            svg_sessions: BTreeMap::new(),
            history: Vec::new(),
            payload_threshold,
        }
    }

    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), ServiceError> {
        match event {
            SessionEvent::Searched { query, spec, top_ids, at } => {
                self.current_spec = Some(spec.clone());
                self.history.push(HistoryEntry {
                    query: query.clone(),
                    spec: spec.clone(),
                    top_ids: top_ids.clone(),
                    at: *at,
                });
            }
            SessionEvent::Committed { record_ids, .. } => {
                for id in record_ids {
                    if !self.committed.contains(id) {
                        self.committed.push(id.clone());
                    }
                }
            }
            SessionEvent::Removed { record_ids, .. } => self.committed.retain(|c| !record_ids.contains(c)),
            SessionEvent::SvgOpened { record_id, text, at } => {
                let doc = SvgDocument::parse(text.clone())?;
                let vault = PayloadVault::with_threshold(&doc, self.payload_threshold);
                let version = SvgVersion {
                    version: 0,
                    created_at: *at,
                    source: VersionSource::Original,
                    document_hash: doc.hash_hex(),
                    edited_nodes: Vec::new(),
                };
                self.svg_sessions.insert(
                    record_id.clone(),
                    SvgSession { versions: vec![version], texts: vec![text.clone()], vault },
                );
            }
            SessionEvent::SvgShown { record_id, node_id, .. } => {
                let svg = self.svg_mut(record_id)?;
                let doc = svg.current();
                show_full_svg(&doc, node_id, &mut svg.vault)?;
            }
            SessionEvent::SvgStitched { record_id, source, edited_nodes, text, at } => {
                let svg = self.svg_mut(record_id)?;
                let doc = SvgDocument::parse(text.clone())?;
                svg.vault.rebind(&doc);
                svg.versions.push(SvgVersion {
                    version: svg.versions.len() as u32,
                    created_at: *at,
                    source: *source,
                    document_hash: doc.hash_hex(),
                    edited_nodes: edited_nodes.clone(),
                });
                svg.texts.push(text.clone());
            }
        }
        Ok(())
    }

    fn svg_mut(&mut self, record_id: &str) -> Result<&mut SvgSession, ServiceError> {
        self.svg_sessions
            .get_mut(record_id)
            .ok_or_else(|| ServiceError::Store(format!("no SVG session for `{record_id}`")))
    }
}

struct Entry {
    session: Session,
    log: Option<File>,
}

/// All sessions, each behind its own lock so one session's mutations are
/// serialized while different sessions proceed in parallel.
pub struct SessionStore {
    dir: PathBuf,
    commit_cap: usize,
    payload_threshold: usize,
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
}

impl SessionStore {
    /// Creates `dir` if needed and replays every `*.jsonl` log in it.
    pub fn open(dir: impl Into<PathBuf>, commit_cap: usize, payload_threshold: usize) -> Result<Self, ServiceError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "jsonl") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
            if check_session_id(&id).is_err() {
                log::warn!("skipping session log with invalid name {}", path.display());
                continue;
            }
            let session = replay(&path, &id, payload_threshold)?;
            sessions.insert(id, Arc::new(Mutex::new(Entry { session, log: None })));
        }
        Ok(SessionStore { dir, commit_cap, payload_threshold, sessions: Mutex::new(sessions) })
    }

    pub fn commit_cap(&self) -> usize {
        self.commit_cap
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.lock().expect("store lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn entry(&self, id: &str) -> Arc<Mutex<Entry>> {
        let mut map = self.sessions.lock().expect("store lock");
        map.entry(id.to_string())
            .or_insert_with(|| {
                Arc::new(Mutex::new(Entry { session: Session::new(id, self.payload_threshold), log: None }))
            })
            .clone()
    }

    /// Runs `f` on a snapshot of the session; unknown sessions read as empty.
    pub fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Result<T, ServiceError> {
        check_session_id(id)?;
        let existing = self.sessions.lock().expect("store lock").get(id).cloned();
        match existing {
            Some(entry) => Ok(f(&entry.lock().expect("session lock").session)),
            None => Ok(f(&Session::new(id, self.payload_threshold))),
        }
    }

    /// `f` inspects the current state and returns the events to record plus
    /// a result. Events are applied and appended to the log before the lock
    /// is released; if `f` fails nothing changes.
    pub fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&Session) -> Result<(Vec<SessionEvent>, T), ServiceError>,
    ) -> Result<T, ServiceError> {
        check_session_id(id)?;
        let entry = self.entry(id);
        let mut guard = entry.lock().expect("session lock");
        let (events, out) = f(&guard.session)?;
        if events.is_empty() {
            return Ok(out);
        }
        let mut next = guard.session.clone();
        for e in &events {
            next.apply(e)?;
        }
        if guard.log.is_none() {
            let file = OpenOptions::new().create(true).append(true).open(self.log_path(id))?;
            guard.log = Some(file);
        }
        let log = guard.log.as_mut().expect("just opened");
        let mut buf = Vec::new();
        for e in &events {
            serde_json::to_writer(&mut buf, e).map_err(|e| ServiceError::Store(e.to_string()))?;
            buf.push(b'\n');
        }
        log.write_all(&buf)?;
        log.sync_data()?;
        guard.session = next;
        Ok(out)
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }
}

fn replay(path: &Path, id: &str, payload_threshold: usize) -> Result<Session, ServiceError> {
    let mut session = Session::new(id, payload_threshold);
    let text = std::fs::read_to_string(path)?;
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n').enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let is_last = lines.peek().is_none();
        if !line.trim().is_empty() {
            match serde_json::from_str::<SessionEvent>(line) {
                Ok(event) => session.apply(&event)?,
                // A torn final line from a crash mid-write is cut off so later
                // appends start on a clean line.
                Err(e) if is_last => {
                    log::warn!("{}: dropping unreadable final line: {e}", path.display());
                    OpenOptions::new().write(true).open(path)?.set_len(offset as u64)?;
                    break;
                }
                Err(e) => return Err(ServiceError::Store(format!("{}:{}: {e}", path.display(), i + 1))),
            }
        }
        offset += line.len();
    }
    Ok(session)
}

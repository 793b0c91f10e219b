//! Service operations, independent of transport. Every method is blocking;
//! the HTTP layer runs them on the blocking pool.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use chrono::Utc;
use intentrank_core::query::{ParseTrace, QueryParser};
use intentrank_core::scoring::{embed_query_facets, rank_corpus, Embedder, IndexSnapshot, RankOptions};
use intentrank_core::{validate_intent_spec, ChartType, FacetId, IntentSpec, RankedResult, WeightPolicy};
use intentrank_svg::{
    show_full_svg, stitch_back, summarize_with, PayloadVault, SanitizedSnippet, SummaryOptions, SvgDocument, SvgError,
    SvgSummaryTree,
};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::propose::{EditBackend, HttpEditBackend};
use crate::select::{auto_select, HttpSelectionBackend, Selection, SelectionBackend, MAX_CANDIDATES};
use crate::session::{HistoryEntry, Session, SessionEvent, SessionStore, SvgSession, SvgVersion, VersionSource};

/// Record metadata key naming the exemplar's SVG file.
pub const SVG_PATH_KEY: &str = "svg_path";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpecEdits {
    #[serde(default)]
    pub rewrites: BTreeMap<FacetId, Option<String>>,
    #[serde(default)]
    pub weights: BTreeMap<FacetId, f64>,
    /// Replaces the chart-type set when present.
    #[serde(default)]
    pub chart_types: Option<BTreeSet<ChartType>>,
}

impl SpecEdits {
    pub fn apply(&self, spec: &mut IntentSpec) -> Result<(), ServiceError> {
        for (&facet, text) in &self.rewrites {
            if !facet.is_embedding() {
                return Err(ServiceError::BadRequest("chart_type has no rewrite; edit chart_types instead".into()));
            }
            spec.rewrites.set(facet, text.clone());
        }
        for (&facet, &w) in &self.weights {
            spec.weights.set(facet, w);
        }
        if let Some(types) = &self.chart_types {
            spec.chart_types = types.clone();
        }
        Ok(())
    }
}

/// Exactly one base (`query`, `spec`, or the session's current spec) plus
/// optional `edits` on top.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub query: Option<String>,
    #[serde(default)]
    pub spec: Option<IntentSpec>,
    #[serde(default)]
    pub edits: Option<SpecEdits>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub hard_chart_filter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub spec: IntentSpec,
    pub results: Vec<RankedResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_trace: Option<ParseTrace>,
    pub notes: Vec<String>,
    pub heads_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResponse {
    pub spec: IntentSpec,
    pub trace: ParseTrace,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AutoSelectRequest {
    /// Defaults to the session's current spec.
    #[serde(default)]
    pub spec: Option<IntentSpec>,
    #[serde(default)]
    pub hard_chart_filter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryResponse {
    pub version: u32,
    pub tree: SvgSummaryTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShowResponse {
    pub version: u32,
    pub document_hash: String,
    #[serde(flatten)]
    pub snippet: SanitizedSnippet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposeResponse {
    pub edits: BTreeMap<String, String>,
    pub version: SvgVersion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub current_spec: Option<IntentSpec>,
    pub committed: Vec<String>,
    pub history: Vec<HistoryEntry>,
    pub svg_versions: BTreeMap<String, Vec<SvgVersion>>,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        SessionView {
            session_id: s.session_id.clone(),
            current_spec: s.current_spec.clone(),
            committed: s.committed.clone(),
            history: s.history.clone(),
            svg_versions: s.svg_sessions.iter().map(|(k, v)| (k.clone(), v.versions.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthReport {
    pub status: String,
    pub records: usize,
    pub dimension: usize,
    pub heads_version: String,
    pub sessions: usize,
}

pub struct App {
    cfg: ServiceConfig,
    snapshot: RwLock<Arc<IndexSnapshot>>,
    embedder: Arc<dyn Embedder>,
    parser: Arc<QueryParser>,
    sessions: SessionStore,
    selector: Option<Arc<dyn SelectionBackend>>,
    editor: Option<Arc<dyn EditBackend>>,
}

impl App {
    pub fn new(
        cfg: ServiceConfig,
        snapshot: IndexSnapshot,
        embedder: Arc<dyn Embedder>,
        parser: QueryParser,
    ) -> Result<Self, ServiceError> {
        if embedder.dimension() != snapshot.dimension() {
            return Err(ServiceError::BadRequest(format!(
                "embedder dimension {} does not match index dimension {}",
                embedder.dimension(),
                snapshot.dimension()
            )));
        }
        let sessions = SessionStore::open(&cfg.session_dir, cfg.commit_cap, cfg.payload_threshold)?;
        Ok(App {
            cfg,
            snapshot: RwLock::new(Arc::new(snapshot)),
            embedder,
            parser: Arc::new(parser),
            sessions,
            selector: None,
            editor: None,
        })
    }

    /// Loads the snapshot, embedder, parser and optional backends named in `cfg`.
    pub fn from_config(cfg: ServiceConfig) -> Result<Self, ServiceError> {
        let snapshot = IndexSnapshot::load(&cfg.index_dir)?;
        let embedder: Arc<dyn Embedder> = Arc::from(cfg.embedder.build(snapshot.dimension())?);
        let parser = QueryParser::new(cfg.parser.clone())?;
        let timeout = Duration::from_secs(cfg.backend_timeout_secs);
        let selector = match &cfg.selector_endpoint {
            Some(url) => {
                Some(Arc::new(HttpSelectionBackend::new(url.clone(), timeout).map_err(ServiceError::BadRequest)?)
                    as Arc<dyn SelectionBackend>)
            }
            None => None,
        };
        let editor = match &cfg.editor_endpoint {
            Some(url) => Some(Arc::new(HttpEditBackend::new(url.clone(), timeout).map_err(ServiceError::BadRequest)?)
                as Arc<dyn EditBackend>),
            None => None,
        };
        let mut app = App::new(cfg, snapshot, embedder, parser)?;
        app.selector = selector;
        app.editor = editor;
        Ok(app)
    }

    pub fn with_selector(mut self, backend: Arc<dyn SelectionBackend>) -> Self {
        self.selector = Some(backend);
        self
    }

    pub fn with_editor(mut self, backend: Arc<dyn EditBackend>) -> Self {
        self.editor = Some(backend);
        self
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    /// The live snapshot. Callers keep using what they got even if a reindex
    /// swaps in a new one meanwhile.
    pub fn snapshot(&self) -> Arc<IndexSnapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn swap_snapshot(&self, next: IndexSnapshot) -> Result<Arc<IndexSnapshot>, ServiceError> {
        if next.dimension() != self.embedder.dimension() {
            return Err(ServiceError::BadRequest(format!(
                "new index dimension {} does not match embedder dimension {}",
                next.dimension(),
                self.embedder.dimension()
            )));
        }
        let next = Arc::new(next);
        *self.snapshot.write().expect("snapshot lock") = next.clone();
        Ok(next)
    }

    pub fn reindex(&self, dir: Option<&Path>) -> Result<HealthReport, ServiceError> {
        let dir = dir.unwrap_or(&self.cfg.index_dir);
        let next = IndexSnapshot::load(dir)?;
        self.swap_snapshot(next)?;
        Ok(self.health())
    }

    pub fn health(&self) -> HealthReport {
        let snap = self.snapshot();
        HealthReport {
            status: "ok".into(),
            records: snap.len(),
            dimension: snap.dimension(),
            heads_version: snap.heads_version().to_string(),
            sessions: self.sessions.session_ids().len(),
        }
    }

    pub fn parse(&self, query: &str) -> Result<ParseResponse, ServiceError> {
        let (spec, trace) = self.parser.parse(query)?;
        Ok(ParseResponse { spec, trace })
    }

    pub fn search(&self, req: &SearchRequest) -> Result<SearchResponse, ServiceError> {
        let snapshot = self.snapshot();
        let mut trace = None;
        let mut spec = match (&req.query, &req.spec) {
            (Some(_), Some(_)) => return Err(ServiceError::BadRequest("give either query or spec, not both".into())),
            (Some(q), None) => {
                let (spec, t) = self.parser.parse(q)?;
                trace = Some(t);
                spec
            }
            (None, Some(spec)) => spec.clone(),
            (None, None) => {
                let Some(id) = &req.session_id else {
                    return Err(ServiceError::BadRequest("one of query, spec or session_id is required".into()));
                };
                if req.edits.is_none() {
                    return Err(ServiceError::BadRequest("session searches need edits, a query or a spec".into()));
                }
                self.sessions
                    .read(id, |s| s.current_spec.clone())?
                    .ok_or_else(|| ServiceError::NoCurrentSpec(id.clone()))?
            }
        };
        if let Some(edits) = &req.edits {
            edits.apply(&mut spec)?;
        }
        let validated = validate_intent_spec(spec, WeightPolicy::Coerce)?;
        let spec = validated.spec;
        let k = req.k.unwrap_or(self.cfg.default_k);
        let results = self.rank(&spec, &snapshot, k, req.hard_chart_filter)?;

        if let Some(id) = &req.session_id {
            let event = SessionEvent::Searched {
                query: req.query.clone(),
                spec: spec.clone(),
                top_ids: results.iter().map(|r| r.record_id.clone()).collect(),
                at: Utc::now(),
            };
            self.sessions.mutate(id, |_| Ok((vec![event], ())))?;
        }
        Ok(SearchResponse {
            spec,
            results,
            parse_trace: trace,
            notes: validated.notes,
            heads_version: snapshot.heads_version().to_string(),
        })
    }

    fn rank(
        &self,
        spec: &IntentSpec,
        snapshot: &IndexSnapshot,
        k: usize,
        filter: bool,
    ) -> Result<Vec<RankedResult>, ServiceError> {
        let vecs = embed_query_facets(spec, self.embedder.as_ref())?;
        Ok(rank_corpus(spec, &vecs, snapshot, RankOptions { k, hard_chart_filter: filter })?)
    }

    pub fn session(&self, id: &str) -> Result<SessionView, ServiceError> {
        self.sessions.read(id, |s| SessionView::from(s))
    }

    /// Full session state, for persistence checks.
    pub fn session_state(&self, id: &str) -> Result<Session, ServiceError> {
        self.sessions.read(id, Session::clone)
    }

    pub fn commits(&self, id: &str) -> Result<Vec<String>, ServiceError> {
        self.sessions.read(id, |s| s.committed.clone())
    }

    pub fn commit(&self, id: &str, record_ids: &[String]) -> Result<Vec<String>, ServiceError> {
        let snapshot = self.snapshot();
        let cap = self.sessions.commit_cap();
        self.sessions.mutate(id, |s| {
            let mut new = Vec::new();
            for r in record_ids {
                if !snapshot.contains(r) {
                    return Err(ServiceError::UnknownRecordId(r.clone()));
                }
                if !s.committed.contains(r) && !new.contains(r) {
                    new.push(r.clone());
                }
            }
            if s.committed.len() + new.len() > cap {
                return Err(ServiceError::CommitCapExceeded { cap });
            }
            let mut after = s.committed.clone();
            after.extend(new.iter().cloned());
            let events =
                if new.is_empty() { vec![] } else { vec![SessionEvent::Committed { record_ids: new, at: Utc::now() }] };
            Ok((events, after))
        })
    }

    /// Removing an id that is not committed is a no-op. SVG versions of a
    /// removed record are kept and come back if it is committed again.
    pub fn remove(&self, id: &str, record_ids: &[String]) -> Result<Vec<String>, ServiceError> {
        self.sessions.mutate(id, |s| {
            let gone: Vec<String> = record_ids.iter().filter(|r| s.committed.contains(r)).cloned().collect();
            let after: Vec<String> = s.committed.iter().filter(|c| !gone.contains(c)).cloned().collect();
            let events =
                if gone.is_empty() { vec![] } else { vec![SessionEvent::Removed { record_ids: gone, at: Utc::now() }] };
            Ok((events, after))
        })
    }

    /// Ranks with the given (or current) spec and picks 1 to 3 of the top 10.
    /// The result is a suggestion; nothing is committed.
    pub fn auto_select(&self, id: &str, req: &AutoSelectRequest) -> Result<Selection, ServiceError> {
        let (spec, query) = match &req.spec {
            Some(spec) => (validate_intent_spec(spec.clone(), WeightPolicy::Coerce)?.spec, None),
            None => {
                let (spec, query) = self
                    .sessions
                    .read(id, |s| (s.current_spec.clone(), s.history.last().and_then(|h| h.query.clone())))?;
                (spec.ok_or_else(|| ServiceError::NoCurrentSpec(id.to_string()))?, query)
            }
        };
        let snapshot = self.snapshot();
        let top = self.rank(&spec, &snapshot, MAX_CANDIDATES, req.hard_chart_filter)?;
        auto_select(query.as_deref(), &spec, &top, &snapshot, self.selector.as_deref())
    }

    fn svg_source(&self, record_id: &str) -> Result<String, ServiceError> {
        let snapshot = self.snapshot();
        let record = snapshot.get(record_id).ok_or_else(|| ServiceError::UnknownRecordId(record_id.to_string()))?;
        let path = record.metadata.get(SVG_PATH_KEY).ok_or_else(|| ServiceError::NoSvgSource(record_id.to_string()))?;
        let path = PathBuf::from(path);
        let path = if path.is_relative() { self.cfg.index_dir.join(path) } else { path };
        Ok(std::fs::read_to_string(&path)?)
    }

    /// Runs `f` against the record's SVG session, opening it from the record's
    /// source file on first use.
    fn with_svg<T>(
        &self,
        id: &str,
        record_id: &str,
        f: impl FnOnce(&SvgSession) -> Result<(Vec<SessionEvent>, T), ServiceError>,
    ) -> Result<T, ServiceError> {
        let needs_open = self.sessions.read(id, |s| {
            if !s.committed.iter().any(|c| c == record_id) {
                return Err(ServiceError::NotCommitted(record_id.to_string()));
            }
            Ok(!s.svg_sessions.contains_key(record_id))
        })??;
        if needs_open {
            let text = self.svg_source(record_id)?;
            SvgDocument::parse(text.clone())?;
            self.sessions.mutate(id, |s| {
                let events = if s.svg_sessions.contains_key(record_id) {
                    vec![]
                } else {
                    vec![SessionEvent::SvgOpened { record_id: record_id.to_string(), text, at: Utc::now() }]
                };
                Ok((events, ()))
            })?;
        }
        self.sessions.mutate(id, |s| {
            if !s.committed.iter().any(|c| c == record_id) {
                return Err(ServiceError::NotCommitted(record_id.to_string()));
            }
            f(&s.svg_sessions[record_id])
        })
    }

    fn check_hash(svg: &SvgSession, expected: Option<&str>, node_id: &str) -> Result<(), ServiceError> {
        match expected {
            Some(h) if h != svg.latest().document_hash => Err(SvgError::UnknownNodeId(node_id.to_string()).into()),
            _ => Ok(()),
        }
    }

    pub fn svg_summarize(
        &self,
        id: &str,
        record_id: &str,
        opts: SummaryOptions,
    ) -> Result<SummaryResponse, ServiceError> {
        self.with_svg(id, record_id, |svg| {
            let doc = svg.current();
            let (_, tree, _) = summarize_with(doc.text(), opts)?;
            Ok((vec![], SummaryResponse { version: svg.latest().version, tree }))
        })
    }

    /// `document_hash` (from an earlier summary) guards against node ids
    /// taken from an older version.
    pub fn svg_show(
        &self,
        id: &str,
        record_id: &str,
        node_id: &str,
        document_hash: Option<&str>,
    ) -> Result<ShowResponse, ServiceError> {
        self.with_svg(id, record_id, |svg| {
            Self::check_hash(svg, document_hash, node_id)?;
            let doc = svg.current();
            let mut vault = svg.vault.clone();
            let snippet = show_full_svg(&doc, node_id, &mut vault)?;
            let events = if vault.len() > svg.vault.len() {
                vec![SessionEvent::SvgShown {
                    record_id: record_id.to_string(),
                    node_id: node_id.to_string(),
                    at: Utc::now(),
                }]
            } else {
                vec![]
            };
            Ok((events, ShowResponse { version: svg.latest().version, document_hash: doc.hash_hex(), snippet }))
        })
    }

    pub fn svg_stitch(
        &self,
        id: &str,
        record_id: &str,
        edits: &BTreeMap<String, String>,
        document_hash: Option<&str>,
    ) -> Result<SvgVersion, ServiceError> {
        self.stitch_as(id, record_id, edits, document_hash, VersionSource::Stitch)
    }

    fn stitch_as(
        &self,
        id: &str,
        record_id: &str,
        edits: &BTreeMap<String, String>,
        document_hash: Option<&str>,
        source: VersionSource,
    ) -> Result<SvgVersion, ServiceError> {
        let mut created = None;
        self.with_svg(id, record_id, |svg| {
            if let Some(first) = edits.keys().next() {
                Self::check_hash(svg, document_hash, first)?;
            }
            let doc = svg.current();
            let out = stitch_back(&doc, edits, &svg.vault)?;
            created = Some(svg.versions.len() as u32);
            let event = SessionEvent::SvgStitched {
                record_id: record_id.to_string(),
                source,
                edited_nodes: edits.keys().cloned().collect(),
                text: out.into_text(),
                at: Utc::now(),
            };
            Ok((vec![event], ()))
        })?;
        let version = created.expect("set on success");
        self.sessions.read(id, |s| s.svg_sessions[record_id].versions[version as usize].clone())
    }

    pub fn svg_versions(&self, id: &str, record_id: &str) -> Result<Vec<SvgVersion>, ServiceError> {
        self.with_svg(id, record_id, |svg| Ok((vec![], svg.versions.clone())))
    }

    pub fn svg_version_text(&self, id: &str, record_id: &str, version: u32) -> Result<String, ServiceError> {
        self.with_svg(id, record_id, |svg| {
            let text = svg.text(version).ok_or_else(|| ServiceError::BadRequest(format!("no version {version}")))?;
            Ok((vec![], text.to_string()))
        })
    }

    /// Hands the current summary and `message` to the edit backend, then
    /// applies the returned edits as a new version.
    pub fn svg_propose(&self, id: &str, record_id: &str, message: &str) -> Result<ProposeResponse, ServiceError> {
        let editor = self.editor.clone().ok_or(ServiceError::NoEditBackend)?;
        let summary = self.svg_summarize(id, record_id, SummaryOptions::default())?;
        let edits = editor.propose(&summary.tree, message).map_err(ServiceError::EditBackend)?;
        let version =
            self.stitch_as(id, record_id, &edits, Some(&summary.tree.document_hash), VersionSource::Propose)?;
        Ok(ProposeResponse { edits, version })
    }
}

/// Vault for CLI use: loads `path` if it exists and belongs to `doc`,
/// otherwise starts empty.
pub fn cli_vault(doc: &SvgDocument, path: &Path, threshold: usize) -> Result<PayloadVault, ServiceError> {
    if path.exists() {
        let v = PayloadVault::load(path)?;
        if v.is_bound_to(doc) {
            return Ok(v);
        }
        log::warn!("{} belongs to another document; starting a new vault", path.display());
    }
    Ok(PayloadVault::with_threshold(doc, threshold))
}

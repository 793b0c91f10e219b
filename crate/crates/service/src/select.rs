//! Auto-selection of 1 to 3 exemplars from the top-10 candidates.
//!
//! An external re-ranker may be configured; its answer is validated and, if
//! unusable, replaced by a deterministic diversity pick: start from the
//! rank-1 candidate and repeatedly add the candidate whose smallest distance
//! to the already-picked set is largest (ties go to the better-ranked one).

use std::time::Duration;

use intentrank_core::scoring::IndexSnapshot;
use intentrank_core::{CorpusRecord, FacetId, IntentSpec, RankedResult};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const MAX_CANDIDATES: usize = 10;
pub const MAX_SELECTED: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionCandidate {
    pub record_id: String,
    pub rank: usize,
    pub total_score: f64,
    pub metadata: std::collections::BTreeMap<String, String>,
}

pub trait SelectionBackend: Send + Sync {
    fn select(
        &self,
        query: Option<&str>,
        spec: &IntentSpec,
        candidates: &[SelectionCandidate],
    ) -> Result<Vec<String>, String>;
}

impl<F> SelectionBackend for F
where
    F: Fn(Option<&str>, &IntentSpec, &[SelectionCandidate]) -> Result<Vec<String>, String> + Send + Sync,
{
    fn select(
        &self,
        query: Option<&str>,
        spec: &IntentSpec,
        candidates: &[SelectionCandidate],
    ) -> Result<Vec<String>, String> {
        self(query, spec, candidates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionSource {
    Backend,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub record_ids: Vec<String>,
    pub source: SelectionSource,
    pub notes: Vec<String>,
}

/// Squared distance between two records over the four facet embeddings.
pub fn facet_distance_sq(a: &CorpusRecord, b: &CorpusRecord) -> f64 {
    FacetId::EMBEDDING
        .iter()
        .map(|&f| {
            a.facet_embeddings[f]
                .as_slice()
                .iter()
                .zip(b.facet_embeddings[f].as_slice())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .sum()
}

/// Greedy max-min pick over `records`, which are in rank order.
pub fn diverse_pick(records: &[&CorpusRecord]) -> Vec<String> {
    if records.is_empty() {
        return Vec::new();
    }
    let mut picked = vec![0usize];
    let mut nearest: Vec<f64> = records.iter().map(|r| facet_distance_sq(r, records[0])).collect();
    while picked.len() < MAX_SELECTED.min(records.len()) {
        let mut best: Option<usize> = None;
        for i in 0..records.len() {
            if picked.contains(&i) {
                continue;
            }
            if best.is_none_or(|b| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("unpicked candidates remain");
        picked.push(b);
        for i in 0..records.len() {
            nearest[i] = nearest[i].min(facet_distance_sq(records[i], records[b]));
        }
    }
    picked.into_iter().map(|i| records[i].id.clone()).collect()
}

fn check_backend_choice(choice: &[String], candidates: &[SelectionCandidate]) -> Result<(), String> {
    if choice.is_empty() || choice.len() > MAX_SELECTED {
        return Err(format!("selected {} ids, expected 1 to {MAX_SELECTED}", choice.len()));
    }
    for (i, id) in choice.iter().enumerate() {
        if !candidates.iter().any(|c| &c.record_id == id) {
            return Err(format!("`{id}` is not among the candidates"));
        }
        if choice[..i].contains(id) {
            return Err(format!("`{id}` selected twice"));
        }
    }
    Ok(())
}

pub fn auto_select(
    query: Option<&str>,
    spec: &IntentSpec,
    top: &[RankedResult],
    snapshot: &IndexSnapshot,
    backend: Option<&dyn SelectionBackend>,
) -> Result<Selection, ServiceError> {
    let top = &top[..top.len().min(MAX_CANDIDATES)];
    if top.is_empty() {
        return Err(ServiceError::EmptyCandidates);
    }
    let records: Vec<&CorpusRecord> = top
        .iter()
        .map(|r| snapshot.get(&r.record_id).ok_or_else(|| ServiceError::UnknownRecordId(r.record_id.clone())))
        .collect::<Result<_, _>>()?;
    let mut notes = Vec::new();
    if let Some(backend) = backend {
        let candidates: Vec<SelectionCandidate> = top
            .iter()
            .zip(&records)
            .enumerate()
            .map(|(i, (r, rec))| SelectionCandidate {
                record_id: r.record_id.clone(),
                rank: i + 1,
                total_score: r.total_score,
                metadata: rec.metadata.clone(),
            })
            .collect();
        match backend.select(query, spec, &candidates) {
            Ok(choice) => match check_backend_choice(&choice, &candidates) {
                Ok(()) => return Ok(Selection { record_ids: choice, source: SelectionSource::Backend, notes }),
                Err(e) => notes.push(format!("BackendInvalidSelection: {e}")),
            },
            Err(e) => notes.push(format!("BackendInvalidSelection: backend error: {e}")),
        }
    }
    Ok(Selection { record_ids: diverse_pick(&records), source: SelectionSource::Fallback, notes })
}

/// Posts `{query, spec, candidates}` and expects `{"selected": [ids]}`.
pub struct HttpSelectionBackend {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpSelectionBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| e.to_string())?;
        Ok(HttpSelectionBackend { endpoint: endpoint.into(), client })
    }
}

impl SelectionBackend for HttpSelectionBackend {
    fn select(
        &self,
        query: Option<&str>,
        spec: &IntentSpec,
        candidates: &[SelectionCandidate],
    ) -> Result<Vec<String>, String> {
        #[derive(Deserialize)]
        struct Reply {
            selected: Vec<String>,
        }
        let body = serde_json::json!({ "query": query, "spec": spec, "candidates": candidates });
        let reply: Reply = self
            .client
            .post(&self.endpoint)
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| e.to_string())?;
        Ok(reply.selected)
    }
}

//! Free-form query → validated [`IntentSpec`].
//!
//! The LLM path renders a taxonomy prompt, validates the returned JSON and
//! retries on invalid output; when it gives up (or no LLM is configured) the
//! keyword fallback parser answers instead.

mod fallback;
mod llm;
mod prompt;

pub use fallback::{parse_query_fallback, CueKind, KeywordTable};
pub use llm::{extract_reply, HttpChatBackend, InFlightGuard, InFlightLimit, LlmBackend, LlmError};
pub use prompt::render_parser_prompt;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{validate_intent_spec, FacetId, IntentSpec, WeightPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParserConfig {
    pub max_retries: usize,
    pub llm_endpoint: Option<String>,
    pub llm_model_name: String,
    /// Skip the LLM entirely.
    pub fallback_only: bool,
    /// Use the keyword parser when the LLM path fails.
    pub fallback_enabled: bool,
    pub keyword_table_path: Option<PathBuf>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            max_retries: 3,
            llm_endpoint: None,
            llm_model_name: "default".into(),
            fallback_only: false,
            fallback_enabled: true,
            keyword_table_path: None,
            api_key_env: None,
            max_in_flight: 4,
            timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseSource {
    Llm,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseAttempt {
    pub raw_model_output: String,
    /// `"ok"` or an error code such as `invalid_json`.
    pub validation_outcome: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseTrace {
    pub attempts: Vec<ParseAttempt>,
    pub source: ParseSource,
    /// The prompt sent to the LLM, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<String>,
    /// Coercions and defaults applied to the accepted spec.
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("parser backend unavailable after {} attempts", .trace.attempts.len())]
    BackendUnavailable { trace: Box<ParseTrace> },
    #[error("keyword table: {0}")]
    KeywordTable(String),
    #[error("parser configuration: {0}")]
    Config(String),
}

impl QueryError {
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::EmptyQuery => "empty_query",
            QueryError::BackendUnavailable { .. } => "backend_unavailable",
            QueryError::KeywordTable(_) => "keyword_table",
            QueryError::Config(_) => "config",
        }
    }
}

/// Stateless apart from configuration; share it freely across threads.
pub struct QueryParser {
    cfg: ParserConfig,
    table: KeywordTable,
    backend: Option<Arc<dyn LlmBackend>>,
}

impl QueryParser {
    /// Builds the HTTP backend from `cfg.llm_endpoint` when one is set.
    pub fn new(cfg: ParserConfig) -> Result<Self, QueryError> {
        let backend: Option<Arc<dyn LlmBackend>> = match (&cfg.llm_endpoint, cfg.fallback_only) {
            (Some(url), false) => {
                let key = cfg.api_key_env.as_ref().and_then(|v| std::env::var(v).ok());
                let http = HttpChatBackend::new(
                    url.clone(),
                    cfg.llm_model_name.clone(),
                    key,
                    cfg.max_in_flight,
                    Duration::from_secs(cfg.timeout_secs),
                )
                .map_err(|e| QueryError::Config(e.to_string()))?;
                Some(Arc::new(http))
            }
            _ => None,
        };
        QueryParser::build(cfg, backend)
    }

    pub fn with_backend(cfg: ParserConfig, backend: Arc<dyn LlmBackend>) -> Result<Self, QueryError> {
        QueryParser::build(cfg, Some(backend))
    }

    fn build(cfg: ParserConfig, backend: Option<Arc<dyn LlmBackend>>) -> Result<Self, QueryError> {
        if cfg.max_retries == 0 {
            return Err(QueryError::Config("max_retries must be at least 1".into()));
        }
        let table = match &cfg.keyword_table_path {
            Some(p) => KeywordTable::load(p)?,
            None => KeywordTable::default_table(),
        };
        Ok(QueryParser { cfg, table, backend })
    }

    pub fn config(&self) -> &ParserConfig {
        &self.cfg
    }

    pub fn keyword_table(&self) -> &KeywordTable {
        &self.table
    }

    pub fn parse(&self, q: &str) -> Result<(IntentSpec, ParseTrace), QueryError> {
        if q.trim().is_empty() {
            return Err(QueryError::EmptyQuery);
        }
        let mut trace = ParseTrace { attempts: Vec::new(), source: ParseSource::Llm, request: None, notes: Vec::new() };
        let backend = if self.cfg.fallback_only { None } else { self.backend.as_ref() };
        if let Some(backend) = backend {
            let prompt = render_parser_prompt(q);
            for _ in 0..self.cfg.max_retries {
                let (raw, outcome) = match backend.complete(&prompt) {
                    Err(LlmError::Transport(e)) => (e, Err("transport")),
                    Ok(text) => {
                        let checked = check_llm_output(&text);
                        (text, checked)
                    }
                };
                match outcome {
                    Ok((spec, notes)) => {
                        trace.attempts.push(ParseAttempt { raw_model_output: raw, validation_outcome: "ok".into() });
                        trace.notes = notes;
                        trace.request = Some(prompt);
                        return Ok((spec, trace));
                    }
                    Err(code) => {
                        trace.attempts.push(ParseAttempt { raw_model_output: raw, validation_outcome: code.into() })
                    }
                }
            }
            trace.request = Some(prompt);
        }

        if !(self.cfg.fallback_only || self.cfg.fallback_enabled) {
            return Err(QueryError::BackendUnavailable { trace: Box::new(trace) });
        }
        let spec = parse_query_fallback(q, &self.table);
        let validated =
            validate_intent_spec(spec, WeightPolicy::Coerce).expect("fallback parser always yields a valid spec");
        trace.source = ParseSource::Fallback;
        trace
            .attempts
            .push(ParseAttempt { raw_model_output: validated.spec.to_json(), validation_outcome: "ok".into() });
        trace.notes.extend(validated.notes);
        Ok((validated.spec, trace))
    }
}

/// One-shot parse with a freshly built parser.
pub fn parse_query(q: &str, cfg: &ParserConfig) -> Result<(IntentSpec, ParseTrace), QueryError> {
    QueryParser::new(cfg.clone())?.parse(q)
}

/// The JSON object inside a reply, tolerating code fences or stray prose.
fn json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

/// Validates one model reply. On failure returns the trace error code.
fn check_llm_output(text: &str) -> Result<(IntentSpec, Vec<String>), &'static str> {
    let body = json_object(text).ok_or("invalid_json")?;
    let mut value: Value = serde_json::from_str(body).map_err(|_| "invalid_json")?;
    let mut notes = Vec::new();
    if let Some(note) = default_chart_type_weight(&mut value) {
        notes.push(note);
    }
    let spec = IntentSpec::from_value(&value).map_err(|e| e.code())?;
    let validated = validate_intent_spec(spec, WeightPolicy::Coerce).map_err(|e| e.code())?;
    notes.extend(validated.notes);
    Ok((validated.spec, notes))
}

/// When the reply omits the chart-type weight, fill in the mean weight of the
/// embedding facets that have a rewrite (1 if none do).
fn default_chart_type_weight(value: &mut Value) -> Option<String> {
    let present: Vec<f64> = FacetId::EMBEDDING
        .iter()
        .filter(|f| {
            value
                .pointer(&format!("/rewrites/{}", f.name()))
                .and_then(Value::as_str)
                .is_some_and(|s| !s.trim().is_empty())
        })
        .filter_map(|f| value.pointer(&format!("/weights/{}", f.name())).and_then(Value::as_f64))
        .collect();
    let weights = value.get_mut("weights")?.as_object_mut()?;
    if weights.contains_key("chart_type") {
        return None;
    }
    let w = if present.is_empty() { 1.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
    weights.insert("chart_type".into(), Value::from(w));
    Some(format!("chart_type weight omitted by backend; defaulted to {w}"))
}

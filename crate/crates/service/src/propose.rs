//! Pass-through hook for model-driven SVG edits: the structural summary and
//! the user's message go out, node-addressed replacement code comes back and
//! is applied through the ordinary stitch path.

use std::collections::BTreeMap;
use std::time::Duration;

use intentrank_svg::SvgSummaryTree;
use serde::Deserialize;

pub trait EditBackend: Send + Sync {
    fn propose(&self, summary: &SvgSummaryTree, message: &str) -> Result<BTreeMap<String, String>, String>;
}

impl<F> EditBackend for F
where
    F: Fn(&SvgSummaryTree, &str) -> Result<BTreeMap<String, String>, String> + Send + Sync,
{
    fn propose(&self, summary: &SvgSummaryTree, message: &str) -> Result<BTreeMap<String, String>, String> {
        self(summary, message)
    }
}

/// Posts `{summary, message}` and expects `{"edits": {node_id: code}}`.
pub struct HttpEditBackend {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpEditBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| e.to_string())?;
        Ok(HttpEditBackend { endpoint: endpoint.into(), client })
    }
}

impl EditBackend for HttpEditBackend {
    fn propose(&self, summary: &SvgSummaryTree, message: &str) -> Result<BTreeMap<String, String>, String> {
        #[derive(Deserialize)]
        struct Reply {
            edits: BTreeMap<String, String>,
        }
        let reply: Reply = self
            .client
            .post(&self.endpoint)
            .json(&serde_json::json!({ "summary": summary, "message": message }))
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| e.to_string())?;
        Ok(reply.edits)
    }
}

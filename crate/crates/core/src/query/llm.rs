//! LLM backends for the query parser.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("transport: {0}")]
    Transport(String),
}

/// Anything that turns a prompt into model text.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

impl<F> LlmBackend for F
where
    F: Fn(&str) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self(prompt)
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct InFlightLimit {
    free: Mutex<usize>,
    cv: Condvar,
}

impl InFlightLimit {
    pub fn new(permits: usize) -> Self {
        InFlightLimit { free: Mutex::new(permits.max(1)), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> InFlightGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        InFlightGuard { limit: self }
    }
}

pub struct InFlightGuard<'a> {
    limit: &'a InFlightLimit,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.limit.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.limit.cv.notify_one();
    }
}

/// Chat-completion style HTTP endpoint: posts `{model, messages, temperature}`
/// and reads `choices[0].message.content`.
pub struct HttpChatBackend {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    limit: InFlightLimit,
}

impl HttpChatBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        max_in_flight: usize,
        timeout: Duration,
    ) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpChatBackend {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            client,
            limit: InFlightLimit::new(max_in_flight),
        })
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        })
    }
}

/// Pulls the reply text out of a chat-completion response body.
pub fn extract_reply(body: &Value) -> Option<String> {
    body.pointer("/choices/0/message/content")
        .or_else(|| body.pointer("/choices/0/text"))
        .or_else(|| body.get("content"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

impl LlmBackend for HttpChatBackend {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let _permit = self.limit.acquire();
        let mut req = self.client.post(&self.endpoint).json(&self.request_body(prompt));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(LlmError::Transport(format!("HTTP {status}")));
        }
        let body: Value = resp.json().map_err(|e| LlmError::Transport(e.to_string()))?;
        extract_reply(&body).ok_or_else(|| LlmError::Transport("response has no message content".into()))
    }
}

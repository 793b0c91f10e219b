//! Text embedder boundary and facet-conditioned query embeddings.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{normalize, EmbeddingVector, FacetId, IntentSpec, PerFacet};

/// Attempts made per embedding request before giving up.
pub const EMBED_ATTEMPTS: usize = 3;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedder transport: {0}")]
    Transport(String),
    #[error("embedder returned {actual} vectors for {expected} texts")]
    CountMismatch { expected: usize, actual: usize },
    #[error("embedder returned dimension {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedder failure for facet `{facet}`: {reason}")]
    EmbedderFailure { facet: FacetId, reason: String },
    #[error("embedder failed after {attempts} attempts: {last}")]
    Exhausted { attempts: usize, last: String },
}

/// Produces raw (unnormalized) text embeddings.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Deterministic stand-in: each text hashes (with a seed) to a vector with
/// components in [-1, 1).
#[derive(Debug, Clone)]
pub struct FixtureEmbedder {
    dim: usize,
    seed: u64,
}

impl FixtureEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        FixtureEmbedder { dim, seed }
    }

    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        let mut block = 0u64;
        while out.len() < self.dim {
            let mut hasher = Sha256::new();
            hasher.update(self.seed.to_le_bytes());
            hasher.update(block.to_le_bytes());
            hasher.update(text.as_bytes());
            let digest = hasher.finalize();
            for chunk in digest.chunks_exact(8) {
                if out.len() == self.dim {
                    break;
                }
                let bits = u64::from_le_bytes(chunk.try_into().unwrap()) >> 11;
                out.push(bits as f64 / (1u64 << 52) as f64 - 1.0);
            }
            block += 1;
        }
        out
    }
}

impl Embedder for FixtureEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Returns preset vectors for known texts, falling back to a fixture
/// embedder for everything else.
#[derive(Debug, Clone)]
pub struct StaticEmbedder {
    table: HashMap<String, Vec<f64>>,
    fallback: FixtureEmbedder,
}

impl StaticEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        StaticEmbedder { table: HashMap::new(), fallback: FixtureEmbedder::new(dim, seed) }
    }

    pub fn insert(&mut self, text: impl Into<String>, vector: Vec<f64>) {
        self.table.insert(text.into(), vector);
    }
}

impl Embedder for StaticEmbedder {
    fn dimension(&self) -> usize {
        self.fallback.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| self.table.get(t).cloned().unwrap_or_else(|| self.fallback.vector(t))).collect())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// `POST {"texts": [...]}` → `{"vectors": [[...]]}`.
pub struct HttpEmbedder {
    endpoint: String,
    dim: usize,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, dim: usize) -> Result<Self, EmbedError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        Ok(HttpEmbedder { endpoint: endpoint.into(), dim, client })
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let response = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest { texts })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let body: EmbedResponse = response.json().map_err(|e| EmbedError::Transport(e.to_string()))?;
        Ok(body.vectors)
    }
}

/// Embedder selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EmbedderConfig {
    Fixture { seed: u64 },
    External { endpoint: String },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Fixture { seed: 0 }
    }
}

impl EmbedderConfig {
    pub fn build(&self, dim: usize) -> Result<Box<dyn Embedder>, EmbedError> {
        Ok(match self {
            EmbedderConfig::Fixture { seed } => Box::new(FixtureEmbedder::new(dim, *seed)),
            EmbedderConfig::External { endpoint } => Box::new(HttpEmbedder::new(endpoint.clone(), dim)?),
        })
    }
}

/// The text sent to the embedder for one facet rewrite.
pub fn facet_prompt(facet: FacetId, rewrite: &str) -> String {
    format!("{}: {}", facet.name(), rewrite)
}

fn embed_with_retry(emb: &dyn Embedder, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
    let mut last = String::new();
    for _ in 0..EMBED_ATTEMPTS {
        match emb.embed(texts) {
            Ok(v) => return Ok(v),
            Err(EmbedError::Transport(e)) => last = e,
            Err(other) => return Err(other),
        }
    }
    Err(EmbedError::Exhausted { attempts: EMBED_ATTEMPTS, last })
}

/// Unit-norm embedding per present facet rewrite; the zero vector for absent
/// facets.
pub fn embed_query_facets(spec: &IntentSpec, emb: &dyn Embedder) -> Result<PerFacet<EmbeddingVector>, EmbedError> {
    let dim = emb.dimension();
    let present: Vec<FacetId> = FacetId::EMBEDDING.into_iter().filter(|&f| spec.rewrites.is_present(f)).collect();
    let mut out = PerFacet::from_fn(|_| EmbeddingVector::zero(dim));
    if present.is_empty() {
        return Ok(out);
    }
    let texts: Vec<String> =
        present.iter().map(|&f| facet_prompt(f, spec.rewrites.get(f).unwrap_or_default())).collect();
    let vectors = embed_with_retry(emb, &texts)?;
    if vectors.len() != texts.len() {
        return Err(EmbedError::CountMismatch { expected: texts.len(), actual: vectors.len() });
    }
    for (facet, raw) in present.into_iter().zip(vectors) {
        if raw.len() != dim {
            return Err(EmbedError::DimensionMismatch { expected: dim, actual: raw.len() });
        }
        out[facet] = normalize(raw).map_err(|e| EmbedError::EmbedderFailure { facet, reason: e.to_string() })?;
    }
    Ok(out)
}

//! Intent-aware exemplar retrieval.
//!
//! A free-form query is parsed into an [`model::IntentSpec`] over five facets
//! (content, chart type, layout, illustration, style). Each corpus record is
//! scored per facet: chart types through a soft [`kernel::KernelTable`],
//! the other four through cosine similarity between a facet-prefixed query
//! embedding and a facet-specific projection of the record's base image
//! embedding. Facet scores are fused by the spec's weights.
//!
//! - [`model`]: shared types and validation
//! - [`query`]: LLM-backed parsing with retry, plus a keyword fallback
//! - [`kernel`]: chart-type kernel
//! - [`scoring`]: embedder boundary, projection heads, index snapshots, ranking
//! - [`alignment`]: contrastive training of the projection heads
//! - [`eval`]: Recall@K, MRR@10, dCRR@10 and the benchmark runner

pub mod alignment;
pub mod eval;
pub mod kernel;
pub mod model;
pub mod query;
pub mod scoring;

pub use model::{
    normalize, validate_intent_spec, ChartType, CorpusRecord, EmbeddingVector, FacetId, IntentSpec, PerFacet,
    RankedResult, WeightPolicy,
};

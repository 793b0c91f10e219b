//! Structural SVG adaptation: summarize a document into a compact tree with
//! path-derived node ids, hand out sanitized subtree code with large embedded
//! payloads swapped for placeholder tokens, and stitch edited subtrees back
//! while restoring those payloads byte for byte.
//!
//! Node ids are child-element index paths from the root: the root element is
//! `"0"`, its third element child `"0.2"`, and so on. Every element has an id,
//! even leaves that the summary folds into their parent's `child_summary`.

mod canonical;
mod document;
mod sanitize;
mod stitch;
mod vault;

pub use canonical::{canonical_diff, canonicalize, CanonicalDifference};
pub use document::{
    summarize, summarize_with, Granularity, SummaryOptions, SvgDocument, SvgSummaryNode, SvgSummaryTree,
};
pub use sanitize::{show_full_svg, SanitizedSnippet};
pub use stitch::stitch_back;
pub use vault::{placeholder_token, PayloadVault, DEFAULT_PAYLOAD_THRESHOLD};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SvgError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    /// Also returned when the vault was bound to a different document, since
    /// node ids from a stale summary cannot be trusted.
    #[error("unknown node id `{0}`")]
    UnknownNodeId(String),
    #[error("unknown placeholder `{0}`")]
    UnknownPlaceholder(String),
    #[error("edit on `{inner}` lies inside edit on `{outer}`")]
    NestedEditConflict { outer: String, inner: String },
    #[error("replacement for `{node_id}` is malformed: {reason}")]
    MalformedReplacement { node_id: String, reason: String },
    #[error("vault data: {0}")]
    Vault(String),
}

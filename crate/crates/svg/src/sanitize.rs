//! Subtree extraction with large data URIs swapped for placeholder tokens.
//!
//! All work happens on raw source bytes: a payload is the exact source text of
//! a data URI, so restoring it reproduces the original bytes even when the
//! value contains entity references or line breaks.

use std::ops::Range;

use roxmltree::Node;
use serde::{Deserialize, Serialize};

use crate::document::{find_node, SvgDocument};
use crate::vault::PayloadVault;
use crate::SvgError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitizedSnippet {
    pub node_id: String,
    pub code: String,
    /// Distinct tokens in `code`, in order of first appearance.
    pub placeholder_tokens: Vec<String>,
}

const QUOTES: [&str; 4] = ["\"", "'", "&quot;", "&apos;"];

fn starts_with_ci(s: &str, prefix: &str) -> bool {
    s.len() >= prefix.len() && s.as_bytes()[..prefix.len()].eq_ignore_ascii_case(prefix.as_bytes())
}

/// Byte ranges of data URIs inside `raw`. With `whole_value`, a value that is
/// itself a data URI counts as one span; `url(...)` references are found
/// anywhere.
#[allow(clippy::single_range_in_vec_init)]
pub(crate) fn data_uri_spans(raw: &str, whole_value: bool) -> Vec<Range<usize>> {
    if whole_value {
        let start = raw.len() - raw.trim_start().len();
        if starts_with_ci(&raw[start..], "data:") {
            return vec![start..raw.trim_end().len()];
        }
    }
    let mut spans = Vec::new();
    let lower = raw.to_ascii_lowercase();
    let mut from = 0;
    while let Some(hit) = lower[from..].find("url(") {
        let mut i = from + hit + 4;
        i += raw[i..].len() - raw[i..].trim_start().len();
        let quote = QUOTES.iter().find(|q| raw[i..].starts_with(**q)).copied();
        if let Some(q) = quote {
            i += q.len();
        }
        from = i;
        if !starts_with_ci(&raw[i..], "data:") {
            continue;
        }
        let rest = &raw[i..];
        let len = match quote {
            Some(q) => rest.find(q),
            None => rest.find(')'),
        }
        .unwrap_or(rest.trim_end().len());
        spans.push(i..i + len);
        from = i + len;
    }
    spans
}

/// Absolute source ranges of every data URI in the subtree rooted at `node`.
pub(crate) fn subtree_payload_spans(text: &str, node: Node) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    for d in node.descendants() {
        if d.is_element() {
            for attr in d.attributes() {
                let r = attr.range_value();
                spans.extend(
                    data_uri_spans(&text[r.clone()], true).into_iter().map(|s| s.start + r.start..s.end + r.start),
                );
            }
        } else if d.is_text() {
            let r = d.range();
            spans.extend(
                data_uri_spans(&text[r.clone()], false).into_iter().map(|s| s.start + r.start..s.end + r.start),
            );
        }
    }
    spans.sort_by_key(|r| r.start);
    spans
}

/// Code of the subtree at `node_id` with each data URI longer than the vault
/// threshold replaced by its token. The vault must be bound to `doc`; a vault
/// from another document version means the caller's node ids are stale.
pub fn show_full_svg(doc: &SvgDocument, node_id: &str, vault: &mut PayloadVault) -> Result<SanitizedSnippet, SvgError> {
    if !vault.is_bound_to(doc) {
        return Err(SvgError::UnknownNodeId(node_id.to_string()));
    }
    let tree = doc.tree();
    let node = find_node(&tree, node_id).ok_or_else(|| SvgError::UnknownNodeId(node_id.to_string()))?;
    let text = doc.text();
    let range = node.range();

    let mut code = String::with_capacity(range.len());
    let mut tokens: Vec<String> = Vec::new();
    let mut cursor = range.start;
    for span in subtree_payload_spans(text, node) {
        if span.len() <= vault.threshold() {
            continue;
        }
        code.push_str(&text[cursor..span.start]);
        let token = vault.intern(text[span.clone()].as_bytes());
        code.push_str(&token);
        if !tokens.contains(&token) {
            tokens.push(token);
        }
        cursor = span.end;
    }
    code.push_str(&text[cursor..range.end]);
    Ok(SanitizedSnippet { node_id: node_id.to_string(), code, placeholder_tokens: tokens })
}

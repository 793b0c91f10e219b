//! Splicing edited subtrees back into the source document.

use std::collections::BTreeMap;
use std::ops::Range;

use roxmltree::{Node, NodeType};

use crate::document::{find_node, is_descendant, parse_xml, SvgDocument};
use crate::vault::{parse_token, PayloadVault, TOKEN_CLOSE, TOKEN_OPEN};
use crate::SvgError;

const WRAPPER: &str = "intentrank-fragment";

fn escape_attr(v: &str) -> String {
    v.replace('&', "&amp;").replace('<', "&lt;").replace('"', "&quot;")
}

/// Wraps `code` in an element redeclaring the namespaces in scope at `node`,
/// so a fragment that uses an ancestor's prefixes still parses.
pub(crate) fn wrap_fragment(code: &str, node: Node) -> String {
    let mut decls = String::new();
    for ns in node.namespaces() {
        match ns.name() {
            Some("xml") => {}
            Some(p) => decls.push_str(&format!(" xmlns:{p}=\"{}\"", escape_attr(ns.uri()))),
            None => decls.push_str(&format!(" xmlns=\"{}\"", escape_attr(ns.uri()))),
        }
    }
    format!("<{WRAPPER}{decls}>{code}</{WRAPPER}>")
}

/// Checks that `code` is one element, optionally surrounded by whitespace,
/// comments and processing instructions.
fn check_fragment(code: &str, node: Node, node_id: &str) -> Result<(), SvgError> {
    let bad = |reason: String| SvgError::MalformedReplacement { node_id: node_id.to_string(), reason };
    let wrapped = wrap_fragment(code, node);
    let tree = parse_xml(&wrapped).map_err(bad)?;
    let mut elements = 0;
    for child in tree.root_element().children() {
        match child.node_type() {
            NodeType::Element => elements += 1,
            NodeType::Text if child.text().is_some_and(|t| t.trim().is_empty()) => {}
            NodeType::Text => return Err(bad("text outside the replacement element".into())),
            _ => {}
        }
    }
    if elements != 1 {
        return Err(bad(format!("expected exactly one element, found {elements}")));
    }
    Ok(())
}

/// Replaces every placeholder token with its vault payload.
fn restore_payloads(code: &str, vault: &PayloadVault) -> Result<String, SvgError> {
    let mut out = String::with_capacity(code.len());
    let mut rest = code;
    while let Some(start) = rest.find(TOKEN_OPEN) {
        out.push_str(&rest[..start]);
        let after = &rest[start..];
        let end = after.find(TOKEN_CLOSE).map(|e| e + TOKEN_CLOSE.len());
        let token = match end {
            Some(e) if parse_token(&after[..e]).is_some() => &after[..e],
            _ => {
                let shown: String = after.chars().take(24).collect();
                return Err(SvgError::UnknownPlaceholder(shown));
            }
        };
        let payload = vault.get(token).ok_or_else(|| SvgError::UnknownPlaceholder(token.to_string()))?;
        let payload = std::str::from_utf8(payload).map_err(|_| SvgError::Vault(format!("{token} is not UTF-8")))?;
        out.push_str(payload);
        rest = &after[token.len()..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Applies `edits` (node id to replacement code) and restores payloads.
/// Edits are validated as a whole before anything is spliced; no edit may
/// target a descendant of another edit.
pub fn stitch_back(
    doc: &SvgDocument,
    edits: &BTreeMap<String, String>,
    vault: &PayloadVault,
) -> Result<SvgDocument, SvgError> {
    if let Some(first) = edits.keys().next() {
        if !vault.is_bound_to(doc) {
            return Err(SvgError::UnknownNodeId(first.clone()));
        }
    }
    let ids: Vec<&String> = edits.keys().collect();
    for (i, outer) in ids.iter().enumerate() {
        for inner in &ids[i + 1..] {
            if is_descendant(outer, inner) {
                return Err(SvgError::NestedEditConflict { outer: (*outer).clone(), inner: (*inner).clone() });
            }
        }
    }

    let tree = doc.tree();
    let mut splices: Vec<(Range<usize>, String)> = Vec::with_capacity(edits.len());
    for (node_id, code) in edits {
        let node = find_node(&tree, node_id).ok_or_else(|| SvgError::UnknownNodeId(node_id.clone()))?;
        let restored = restore_payloads(code, vault)?;
        check_fragment(&restored, node, node_id)?;
        splices.push((node.range(), restored));
    }
    splices.sort_by_key(|(r, _)| std::cmp::Reverse(r.start));

    let mut text = doc.text().to_string();
    for (range, code) in splices {
        text.replace_range(range, &code);
    }
    SvgDocument::parse(text).map_err(|e| SvgError::MalformedReplacement {
        node_id: edits.keys().cloned().collect::<Vec<_>>().join(","),
        reason: e.to_string(),
    })
}

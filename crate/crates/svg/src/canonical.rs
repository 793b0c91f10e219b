//! Canonical serialization used to compare documents across edits.
//!
//! Attributes are sorted, whitespace runs in text collapse to one space,
//! whitespace-only text, comments and processing instructions are dropped,
//! values use double quotes, and names are namespace-resolved so prefix
//! choices and redundant `xmlns` declarations do not matter.

use std::collections::BTreeMap;
use std::fmt::Write;

use roxmltree::Node;
use serde::{Deserialize, Serialize};

use crate::document::parse_xml;
use crate::SvgError;

const SVG_NS: &str = "http://www.w3.org/2000/svg";
const XLINK_NS: &str = "http://www.w3.org/1999/xlink";
const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

fn qualified(namespace: Option<&str>, local: &str) -> String {
    match namespace {
        None | Some(SVG_NS) => local.to_string(),
        Some(XLINK_NS) => format!("xlink:{local}"),
        Some(XML_NS) => format!("xml:{local}"),
        Some(uri) => format!("{{{uri}}}{local}"),
    }
}

fn tag(node: Node) -> String {
    qualified(node.tag_name().namespace(), node.tag_name().name())
}

fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn escape_attr(s: &str) -> String {
    escape_text(s).replace('"', "&quot;")
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn sorted_attributes(node: Node) -> BTreeMap<String, String> {
    node.attributes().map(|a| (qualified(a.namespace(), a.name()), a.value().to_string())).collect()
}

fn write_node(node: Node, out: &mut String) {
    if node.is_text() {
        let t = collapse(node.text().unwrap_or(""));
        if !t.is_empty() {
            out.push_str(&escape_text(&t));
        }
        return;
    }
    if !node.is_element() {
        return;
    }
    let name = tag(node);
    out.push('<');
    out.push_str(&name);
    for (k, v) in sorted_attributes(node) {
        let _ = write!(out, " {k}=\"{}\"", escape_attr(&v));
    }
    let start = out.len();
    out.push('>');
    for child in node.children() {
        write_node(child, out);
    }
    if out.len() == start + 1 {
        out.truncate(start);
        out.push_str("/>");
    } else {
        let _ = write!(out, "</{name}>");
    }
}

pub fn canonicalize(svg: &str) -> Result<String, SvgError> {
    let tree = parse_xml(svg).map_err(SvgError::MalformedDocument)?;
    let mut out = String::new();
    write_node(tree.root_element(), &mut out);
    Ok(out)
}

/// One structural difference between two documents, located by node id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CanonicalDifference {
    Tag { node_id: String, left: String, right: String },
    Attribute { node_id: String, name: String, left: Option<String>, right: Option<String> },
    Text { node_id: String, left: String, right: String },
    ChildCount { node_id: String, left: usize, right: usize },
}

fn direct_text(node: Node) -> String {
    let parts: Vec<String> = node.children().filter(Node::is_text).map(|t| collapse(t.text().unwrap_or(""))).collect();
    collapse(&parts.join(" "))
}

fn diff_nodes(a: Node, b: Node, id: &str, out: &mut Vec<CanonicalDifference>) {
    let (ta, tb) = (tag(a), tag(b));
    if ta != tb {
        out.push(CanonicalDifference::Tag { node_id: id.into(), left: ta, right: tb });
        return;
    }
    let (aa, ab) = (sorted_attributes(a), sorted_attributes(b));
    let names: std::collections::BTreeSet<&String> = aa.keys().chain(ab.keys()).collect();
    for name in names {
        let (l, r) = (aa.get(name), ab.get(name));
        if l != r {
            out.push(CanonicalDifference::Attribute {
                node_id: id.into(),
                name: name.clone(),
                left: l.cloned(),
                right: r.cloned(),
            });
        }
    }
    let (xa, xb) = (direct_text(a), direct_text(b));
    if xa != xb {
        out.push(CanonicalDifference::Text { node_id: id.into(), left: xa, right: xb });
    }
    let ca: Vec<Node> = a.children().filter(Node::is_element).collect();
    let cb: Vec<Node> = b.children().filter(Node::is_element).collect();
    if ca.len() != cb.len() {
        out.push(CanonicalDifference::ChildCount { node_id: id.into(), left: ca.len(), right: cb.len() });
    }
    for (i, (x, y)) in ca.iter().zip(&cb).enumerate() {
        diff_nodes(*x, *y, &format!("{id}.{i}"), out);
    }
}

/// Differences between the canonical forms of two documents, in pre-order.
/// Empty exactly when the canonical serializations are equal.
pub fn canonical_diff(left: &str, right: &str) -> Result<Vec<CanonicalDifference>, SvgError> {
    let a = parse_xml(left).map_err(SvgError::MalformedDocument)?;
    let b = parse_xml(right).map_err(SvgError::MalformedDocument)?;
    let mut out = Vec::new();
    diff_nodes(a.root_element(), b.root_element(), "0", &mut out);
    Ok(out)
}

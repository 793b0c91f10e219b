//! Parsed documents, node-id addressing and the structural summary.

use std::collections::BTreeMap;
use std::ops::Range;

use roxmltree::{Document, Node, ParsingOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::vault::PayloadVault;
use crate::SvgError;

const EXCERPT_CHARS: usize = 40;

/// Elements summarized as their own node even when they have no children.
const CONTAINER_TAGS: &[&str] = &[
    "svg",
    "g",
    "defs",
    "symbol",
    "a",
    "switch",
    "clipPath",
    "mask",
    "pattern",
    "marker",
    "foreignObject",
    "text",
    "linearGradient",
    "radialGradient",
    "filter",
];

pub(crate) fn parse_options() -> ParsingOptions {
    ParsingOptions { allow_dtd: true, ..ParsingOptions::default() }
}

pub(crate) fn parse_xml(text: &str) -> Result<Document<'_>, String> {
    Document::parse_with_options(text, parse_options()).map_err(|e| e.to_string())
}

/// Source text of an SVG document that is known to be well-formed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvgDocument {
    text: String,
    hash: [u8; 32],
}

impl SvgDocument {
    pub fn parse(text: impl Into<String>) -> Result<Self, SvgError> {
        let text = text.into();
        parse_xml(&text).map_err(SvgError::MalformedDocument)?;
        let hash = Sha256::digest(text.as_bytes()).into();
        Ok(SvgDocument { text, hash })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn into_text(self) -> String {
        self.text
    }

    /// Hex SHA-256 of the source bytes.
    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash)
    }

    pub(crate) fn hash(&self) -> [u8; 32] {
        self.hash
    }

    pub(crate) fn tree(&self) -> Document<'_> {
        parse_xml(&self.text).expect("validated at construction")
    }

    /// Byte range of the element with this id, start tag through end tag.
    pub fn node_range(&self, node_id: &str) -> Result<Range<usize>, SvgError> {
        let tree = self.tree();
        find_node(&tree, node_id).map(|n| n.range()).ok_or_else(|| SvgError::UnknownNodeId(node_id.to_string()))
    }

    pub fn contains_node(&self, node_id: &str) -> bool {
        find_node(&self.tree(), node_id).is_some()
    }

    /// Ids of every element in document order.
    pub fn node_ids(&self) -> Vec<String> {
        let tree = self.tree();
        let mut out = Vec::new();
        collect_ids(tree.root_element(), "0".to_string(), &mut out);
        out
    }
}

fn collect_ids(node: Node, id: String, out: &mut Vec<String>) {
    out.push(id.clone());
    for (i, child) in node.children().filter(Node::is_element).enumerate() {
        collect_ids(child, format!("{id}.{i}"), out);
    }
}

/// Follows a `"0.i.j"` path of element-child indices.
pub(crate) fn find_node<'a, 'i>(doc: &'a Document<'i>, node_id: &str) -> Option<Node<'a, 'i>> {
    let mut parts = node_id.split('.');
    if parts.next()? != "0" {
        return None;
    }
    let mut node = doc.root_element();
    for part in parts {
        if part.is_empty() || (part.len() > 1 && part.starts_with('0')) {
            return None;
        }
        let idx: usize = part.parse().ok()?;
        node = node.children().filter(Node::is_element).nth(idx)?;
    }
    Some(node)
}

/// Whether `inner` names a strict descendant of `outer`.
pub(crate) fn is_descendant(outer: &str, inner: &str) -> bool {
    inner.len() > outer.len() && inner.starts_with(outer) && inner.as_bytes()[outer.len()] == b'.'
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Grouping/container elements and any element with element children;
    /// childless leaves only show up in their parent's `child_summary`.
    #[default]
    Containers,
    AllElements,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SummaryOptions {
    pub granularity: Granularity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvgSummaryNode {
    pub node_id: String,
    pub tag: String,
    /// Direct element children counted by tag.
    pub child_summary: BTreeMap<String, usize>,
    pub depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text_excerpt: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub children: Vec<SvgSummaryNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvgSummaryTree {
    pub document_hash: String,
    pub root: SvgSummaryNode,
}

impl SvgSummaryTree {
    /// All nodes in pre-order.
    pub fn nodes(&self) -> Vec<&SvgSummaryNode> {
        fn walk<'a>(n: &'a SvgSummaryNode, out: &mut Vec<&'a SvgSummaryNode>) {
            out.push(n);
            for c in &n.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn find(&self, node_id: &str) -> Option<&SvgSummaryNode> {
        self.nodes().into_iter().find(|n| n.node_id == node_id)
    }
}

fn is_listed(node: Node, granularity: Granularity) -> bool {
    match granularity {
        Granularity::AllElements => true,
        Granularity::Containers => {
            CONTAINER_TAGS.contains(&node.tag_name().name()) || node.children().any(|c| c.is_element())
        }
    }
}

fn excerpt(node: Node) -> Option<String> {
    let text: String = node.descendants().filter(Node::is_text).filter_map(|n| n.text()).collect::<Vec<_>>().join(" ");
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    (!collapsed.is_empty()).then(|| collapsed.chars().take(EXCERPT_CHARS).collect())
}

fn build(node: Node, node_id: String, depth: usize, opts: SummaryOptions) -> SvgSummaryNode {
    let mut child_summary = BTreeMap::new();
    let mut children = Vec::new();
    for (i, child) in node.children().filter(Node::is_element).enumerate() {
        *child_summary.entry(child.tag_name().name().to_string()).or_insert(0) += 1;
        if is_listed(child, opts.granularity) {
            children.push(build(child, format!("{node_id}.{i}"), depth + 1, opts));
        }
    }
    SvgSummaryNode {
        node_id,
        tag: node.tag_name().name().to_string(),
        child_summary,
        depth,
        text_excerpt: excerpt(node),
        children,
    }
}

/// Summary tree with default options, plus an empty vault bound to `svg`.
pub fn summarize(svg: &str) -> Result<(SvgDocument, SvgSummaryTree, PayloadVault), SvgError> {
    summarize_with(svg, SummaryOptions::default())
}

pub fn summarize_with(
    svg: &str,
    opts: SummaryOptions,
) -> Result<(SvgDocument, SvgSummaryTree, PayloadVault), SvgError> {
    let doc = SvgDocument::parse(svg)?;
    let tree = doc.tree();
    let summary =
        SvgSummaryTree { document_hash: doc.hash_hex(), root: build(tree.root_element(), "0".into(), 0, opts) };
    drop(tree);
    let vault = PayloadVault::new(&doc);
    Ok((doc, summary, vault))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_runs_fold_into_counts() {
        let (_, s, _) = summarize("<svg><g><rect/><rect/><rect/></g></svg>").unwrap();
        assert_eq!(s.root.tag, "svg");
        assert_eq!(s.root.children.len(), 1);
        let g = &s.root.children[0];
        assert_eq!(g.node_id, "0.0");
        assert_eq!(g.depth, 1);
        assert_eq!(g.child_summary, BTreeMap::from([("rect".to_string(), 3)]));
        assert!(g.children.is_empty());
    }

    #[test]
    fn empty_root() {
        let (_, s, _) = summarize("<svg/>").unwrap();
        assert_eq!(s.root.node_id, "0");
        assert!(s.root.children.is_empty());
        assert!(s.root.child_summary.is_empty());
    }

    #[test]
    fn ids_follow_element_indices_and_are_stable() {
        let svg = r#"<svg xmlns="http://www.w3.org/2000/svg"><!-- c --><title>T</title>
            <g><circle/><g id="in"><text>Hello   world</text></g></g></svg>"#;
        let (_, a, _) = summarize(svg).unwrap();
        let (_, b, _) = summarize(svg).unwrap();
        assert_eq!(a, b);
        let inner = a.find("0.1.1").unwrap();
        assert_eq!(inner.tag, "g");
        assert_eq!(inner.depth, 2);
        assert_eq!(a.find("0.1.1.0").unwrap().text_excerpt.as_deref(), Some("Hello world"));
        let (_, all, _) = summarize_with(svg, SummaryOptions { granularity: Granularity::AllElements }).unwrap();
        assert_eq!(all.nodes().len(), 6);
        let ids: Vec<_> = all.nodes().iter().map(|n| n.node_id.clone()).collect();
        assert_eq!(ids, SvgDocument::parse(svg).unwrap().node_ids());
    }

    #[test]
    fn excerpt_is_truncated() {
        let long = "x".repeat(100);
        let (_, s, _) = summarize(&format!("<svg><text>{long}</text></svg>")).unwrap();
        assert_eq!(s.root.text_excerpt.as_ref().unwrap().chars().count(), 40);
    }

    #[test]
    fn node_lookup() {
        let doc = SvgDocument::parse("<svg><g><rect/></g></svg>").unwrap();
        let tree = doc.tree();
        assert!(find_node(&tree, "0.0.0").is_some());
        for bad in ["", "1", "0.1", "0.0.0.0", "0.00", "0..0", "0.-1", "x"] {
            assert!(find_node(&tree, bad).is_none(), "{bad}");
        }
        assert_eq!(&doc.text()[doc.node_range("0.0").unwrap()], "<g><rect/></g>");
        assert!(is_descendant("0.1", "0.1.2"));
        assert!(!is_descendant("0.1", "0.12"));
        assert!(!is_descendant("0.1", "0.1"));
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(summarize("<svg><g></svg>"), Err(SvgError::MalformedDocument(_))));
        assert!(matches!(summarize(""), Err(SvgError::MalformedDocument(_))));
    }
}

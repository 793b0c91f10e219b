//! Deterministic keyword parser used when no LLM is configured or the LLM
//! keeps producing invalid output.

use std::collections::BTreeMap;
use std::path::Path;

use super::QueryError;
use crate::model::{ChartType, FacetId, IntentSpec};

const DEFAULT_TABLE: &str = include_str!("../../data/keywords.tsv");

/// What a cue phrase signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CueKind {
    /// One of the four embedding facets.
    Facet(FacetId),
    Chart(ChartType),
    /// Introduces a free-text content phrase ("of", "about").
    Topic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordTable {
    /// Lowercased cue → kind.
    cues: BTreeMap<String, CueKind>,
}

impl KeywordTable {
    pub fn default_table() -> Self {
        KeywordTable::parse_tsv(DEFAULT_TABLE).expect("shipped keyword table parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QueryError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| QueryError::KeywordTable(format!("{}: {e}", path.as_ref().display())))?;
        KeywordTable::parse_tsv(&text)
    }

    pub fn parse_tsv(text: &str) -> Result<Self, QueryError> {
        let mut cues = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |m: &str| QueryError::KeywordTable(format!("line {}: {m}", n + 1));
            let (cue, target) = line.split_once('\t').ok_or_else(|| err("expected cue<TAB>facet"))?;
            let cue = normalize_text(cue);
            if cue.is_empty() {
                return Err(err("empty cue"));
            }
            let target = target.trim();
            let kind = if let Some(name) = target.strip_prefix("chart_type:") {
                CueKind::Chart(name.parse().map_err(|_| err(&format!("unknown chart type `{name}`")))?)
            } else if target == "topic" {
                CueKind::Topic
            } else {
                let facet: FacetId = target.parse().map_err(|_| err(&format!("unknown facet `{target}`")))?;
                if !facet.is_embedding() {
                    return Err(err("use chart_type:<name> for chart-type cues"));
                }
                CueKind::Facet(facet)
            };
            if let Some(prev) = cues.insert(cue.clone(), kind) {
                if prev != kind {
                    return Err(err(&format!("cue `{cue}` mapped twice")));
                }
            }
        }
        Ok(KeywordTable { cues })
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    pub fn get(&self, cue: &str) -> Option<CueKind> {
        self.cues.get(&normalize_text(cue)).copied()
    }
}

/// Lowercase with runs of whitespace collapsed to one space.
fn normalize_text(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn at_boundary(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().next_back().is_none_or(|c| !is_word_char(c));
    let after = text[end..].chars().next().is_none_or(|c| !is_word_char(c));
    before && after
}

#[derive(Debug, Clone, Copy)]
struct Match {
    start: usize,
    end: usize,
    kind: CueKind,
}

/// Non-overlapping cue matches, longest cue first, then leftmost.
fn find_matches(text: &str, table: &KeywordTable) -> Vec<Match> {
    let mut candidates = Vec::new();
    for (cue, &kind) in &table.cues {
        let mut from = 0;
        while let Some(pos) = text[from..].find(cue.as_str()) {
            let start = from + pos;
            let end = start + cue.len();
            if at_boundary(text, start, end) {
                candidates.push(Match { start, end, kind });
            }
            from = start + text[start..].chars().next().map_or(1, char::len_utf8);
        }
    }
    candidates.sort_by(|a, b| (b.end - b.start).cmp(&(a.end - a.start)).then(a.start.cmp(&b.start)));
    let mut taken: Vec<Match> = Vec::new();
    for m in candidates {
        if taken.iter().all(|t| m.end <= t.start || m.start >= t.end) {
            taken.push(m);
        }
    }
    taken.sort_by_key(|m| m.start);
    taken
}

const CLAUSE_BREAKS: &[char] = &[',', ';', '.', ':', '!', '?', '(', ')'];
const LEADING_FILLER: &[&str] = &["the", "a", "an", "my", "our", "some"];

/// The content phrase following a topic marker.
fn topic_phrase(text: &str, from: usize, limit: usize) -> Option<String> {
    let window = &text[from..limit];
    let cut = window.find(CLAUSE_BREAKS).unwrap_or(window.len());
    let mut words: Vec<&str> = window[..cut].split_whitespace().collect();
    while words.first().is_some_and(|w| LEADING_FILLER.contains(w)) {
        words.remove(0);
    }
    (!words.is_empty()).then(|| words.join(" "))
}

/// Rule-based parse: rewrites are the matched cue spans per facet, weights
/// are per-facet match counts over the total, chart types are those named.
pub fn parse_query_fallback(q: &str, table: &KeywordTable) -> IntentSpec {
    let text = normalize_text(q);
    let matches = find_matches(&text, table);

    let mut spans: BTreeMap<FacetId, Vec<String>> = BTreeMap::new();
    let mut counts: BTreeMap<FacetId, usize> = BTreeMap::new();
    let mut spec = IntentSpec::default();

    for (i, m) in matches.iter().enumerate() {
        let facet = match m.kind {
            CueKind::Facet(f) => {
                spans.entry(f).or_default().push(text[m.start..m.end].to_string());
                f
            }
            CueKind::Chart(t) => {
                spec.chart_types.insert(t);
                FacetId::ChartType
            }
            CueKind::Topic => {
                let limit = matches.get(i + 1).map_or(text.len(), |n| n.start);
                match topic_phrase(&text, m.end, limit) {
                    Some(p) => {
                        spans.entry(FacetId::Content).or_default().push(p);
                        FacetId::Content
                    }
                    None => continue,
                }
            }
        };
        *counts.entry(facet).or_default() += 1;
    }

    let total: usize = counts.values().sum();
    if total == 0 {
        spec.rewrites.content = Some(text);
        spec.weights.content = 1.0;
        return spec;
    }
    for (facet, parts) in spans {
        let mut seen = Vec::new();
        for p in parts {
            if !seen.contains(&p) {
                seen.push(p);
            }
        }
        spec.rewrites.set(facet, Some(seen.join(", ")));
    }
    for (facet, n) in counts {
        spec.weights.set(facet, n as f64 / total as f64);
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(q: &str) -> IntentSpec {
        parse_query_fallback(q, &KeywordTable::default_table())
    }

    #[test]
    fn style_and_layout_split_evenly() {
        let s = parse("minimalist radial schedule");
        assert_eq!(s.rewrites.style.as_deref(), Some("minimalist"));
        assert_eq!(s.rewrites.layout.as_deref(), Some("radial"));
        assert_eq!(s.weights.style, 0.5);
        assert_eq!(s.weights.layout, 0.5);
        assert_eq!(s.weights.content, 0.0);
        assert!(s.chart_types.is_empty());
    }

    #[test]
    fn chart_name_alone() {
        let s = parse("pie chart");
        assert_eq!(s.chart_types, [ChartType::PieChart].into_iter().collect());
        assert_eq!(s.weights.chart_type, 1.0);
        for f in FacetId::EMBEDDING {
            assert_eq!(s.weights.get(f), 0.0);
            assert!(!s.rewrites.is_present(f));
        }
    }

    #[test]
    fn topic_marker_yields_content() {
        let s = parse("bar chart of screen time");
        assert_eq!(s.chart_types, [ChartType::BarChart].into_iter().collect());
        assert_eq!(s.rewrites.content.as_deref(), Some("screen time"));
        assert_eq!(s.rewrites.layout, None);
        assert_eq!(s.weights.layout, 0.0);
        assert_eq!(s.weights.content, 0.5);
    }

    #[test]
    fn mixed_query_with_synonym() {
        let s = parse("a rose chart ranking infographic, editorial style, dense annotations");
        assert!(s.chart_types.contains(&ChartType::PieChart));
        assert_eq!(s.rewrites.style.as_deref(), Some("editorial"));
        assert_eq!(s.rewrites.layout.as_deref(), Some("dense annotations"));
        assert_eq!(s.rewrites.content.as_deref(), Some("ranking"));
        assert_eq!(s.rewrites.illustration, None);
        assert_eq!(s.weights.illustration, 0.0);
        for f in [FacetId::ChartType, FacetId::Style, FacetId::Layout, FacetId::Content] {
            assert!((s.weights.get(f) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn no_cues_gives_content_only() {
        let s = parse("  Quarterly   Revenue ");
        assert_eq!(s.rewrites.content.as_deref(), Some("quarterly revenue"));
        assert_eq!(s.weights.content, 1.0);
        assert_eq!(s.weights.chart_type, 0.0);
    }

    #[test]
    fn longest_cue_wins_and_boundaries_hold() {
        let s = parse("donut chart with pastel colors");
        assert_eq!(s.chart_types.len(), 1);
        assert_eq!(s.rewrites.style.as_deref(), Some("pastel colors"));
        // "pie" inside "piecemeal" is not a cue.
        let s = parse("piecemeal");
        assert!(s.chart_types.is_empty());
    }

    #[test]
    fn table_errors() {
        assert!(KeywordTable::parse_tsv("radial\tspace").is_err());
        assert!(KeywordTable::parse_tsv("radial").is_err());
        assert!(KeywordTable::parse_tsv("x\tchart_type:Blob").is_err());
        assert!(KeywordTable::parse_tsv("x\tchart_type").is_err());
        assert!(KeywordTable::parse_tsv("x\tstyle\nx\tlayout").is_err());
        let t = KeywordTable::parse_tsv("# c\n\nBig  Words\tstyle\n").unwrap();
        assert_eq!(t.get("big words"), Some(CueKind::Facet(FacetId::Style)));
    }
}

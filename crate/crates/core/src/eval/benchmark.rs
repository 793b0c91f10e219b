//! Benchmark runner over query–target pair files.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mrr_at_10, recall_at_k, Rank};
use super::EvalError;
use crate::model::{validate_intent_spec, IntentSpec, WeightPolicy};
use crate::query::{ParseSource, QueryParser};
use crate::scoring::embedder::{embed_query_facets, Embedder};
use crate::scoring::index::IndexSnapshot;
use crate::scoring::rank::{rank_corpus, RankOptions};

/// Query family, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryTag {
    SyntheticGeneral,
    SyntheticMultifacet,
    HumanShort,
    HumanLong,
}

impl QueryTag {
    pub const ALL: [QueryTag; 4] =
        [QueryTag::SyntheticGeneral, QueryTag::SyntheticMultifacet, QueryTag::HumanShort, QueryTag::HumanLong];

    pub fn name(self) -> &'static str {
        match self {
            QueryTag::SyntheticGeneral => "synthetic-general",
            QueryTag::SyntheticMultifacet => "synthetic-multifacet",
            QueryTag::HumanShort => "human-short",
            QueryTag::HumanLong => "human-long",
        }
    }
}

/// Free text to be parsed, or a spec that skips parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryInput {
    Text(String),
    Spec(IntentSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTargetPair {
    pub query: QueryInput,
    pub target_id: String,
    pub tag: QueryTag,
}

pub fn read_pairs_jsonl(reader: impl BufRead) -> Result<Vec<QueryTargetPair>, EvalError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = serde_json::from_str(&line).map_err(|e| EvalError::Parse { line: n + 1, reason: e.to_string() })?;
        out.push(pair);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    /// Targets ranked deeper than this count as misses; `None` ranks the
    /// whole snapshot.
    pub list_depth: Option<usize>,
    pub hard_chart_filter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    /// Position in the pair file (0-based).
    pub index: usize,
    pub tag: QueryTag,
    pub target_id: String,
    /// `None` when the query was excluded.
    pub rank: Option<Rank>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse_source: Option<ParseSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagMetrics {
    pub tag: String,
    pub queries: usize,
    pub r_at_1: f64,
    pub r_at_5: f64,
    pub mrr_at_10: f64,
}

impl TagMetrics {
    fn from_ranks(tag: &str, ranks: &[Rank]) -> Option<TagMetrics> {
        Some(TagMetrics {
            tag: tag.to_string(),
            queries: ranks.len(),
            r_at_1: recall_at_k(ranks, 1).ok()?,
            r_at_5: recall_at_k(ranks, 5).ok()?,
            mrr_at_10: mrr_at_10(ranks).ok()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Per query family, in [`QueryTag::ALL`] order, families without
    /// evaluated queries omitted.
    pub by_tag: Vec<TagMetrics>,
    pub overall: Option<TagMetrics>,
    pub excluded: usize,
    pub warnings: Vec<String>,
    pub queries: Vec<QueryOutcome>,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned table of percentages: one row per family, `R@1 / R@5 / MRR@10`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<22} {:>6}   R@1 / R@5 / MRR@10", "query family", "n");
        let rows = self.by_tag.iter().chain(self.overall.iter());
        for m in rows {
            let _ = writeln!(
                out,
                "{:<22} {:>6}   {:6.2} / {:6.2} / {:6.2}",
                m.tag,
                m.queries,
                100.0 * m.r_at_1,
                100.0 * m.r_at_5,
                100.0 * m.mrr_at_10
            );
        }
        if self.excluded > 0 {
            let _ = writeln!(out, "excluded queries: {}", self.excluded);
        }
        out
    }

    /// Writes `report.json` and `report.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), EvalError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| EvalError::Io(e.to_string()))?;
        std::fs::write(dir.join("report.json"), self.to_json()).map_err(|e| EvalError::Io(e.to_string()))?;
        std::fs::write(dir.join("report.txt"), self.to_text()).map_err(|e| EvalError::Io(e.to_string()))?;
        Ok(())
    }
}

/// Position of `target` in the full ranking for one spec.
pub fn rank_of_target(
    spec: &IntentSpec,
    embedder: &dyn Embedder,
    snapshot: &IndexSnapshot,
    target: &str,
    cfg: BenchmarkConfig,
) -> Result<Rank, String> {
    let vecs = embed_query_facets(spec, embedder).map_err(|e| format!("embedding failed: {e}"))?;
    let opts = RankOptions { k: snapshot.len(), hard_chart_filter: cfg.hard_chart_filter };
    let ranked = rank_corpus(spec, &vecs, snapshot, opts).map_err(|e| format!("ranking failed: {e}"))?;
    let pos = ranked.iter().position(|r| r.record_id == target).map(|p| p + 1);
    Ok(match (pos, cfg.list_depth) {
        (Some(p), Some(depth)) if p > depth => Rank::Miss,
        (Some(p), _) => Rank::Hit(p),
        (None, _) => Rank::Miss,
    })
}

/// Evaluates every pair against the snapshot. Unknown target ids abort the
/// run; parse or embedding failures exclude that query with a warning.
pub fn run_benchmark(
    pairs: &[QueryTargetPair],
    snapshot: &IndexSnapshot,
    parser: &QueryParser,
    embedder: &dyn Embedder,
    cfg: BenchmarkConfig,
) -> Result<BenchmarkReport, EvalError> {
    if let Some((index, p)) = pairs.iter().enumerate().find(|(_, p)| !snapshot.contains(&p.target_id)) {
        return Err(EvalError::UnresolvableTarget { index, target_id: p.target_id.clone() });
    }

    let queries: Vec<QueryOutcome> = pairs
        .par_iter()
        .enumerate()
        .map(|(index, pair)| {
            let mut outcome = QueryOutcome {
                index,
                tag: pair.tag,
                target_id: pair.target_id.clone(),
                rank: None,
                parse_source: None,
                error: None,
            };
            let spec = match &pair.query {
                QueryInput::Text(q) => match parser.parse(q) {
                    Ok((spec, trace)) => {
                        outcome.parse_source = Some(trace.source);
                        spec
                    }
                    Err(e) => {
                        outcome.error = Some(format!("parser failure: {e}"));
                        return outcome;
                    }
                },
                QueryInput::Spec(spec) => match validate_intent_spec(spec.clone(), WeightPolicy::Coerce) {
                    Ok(v) => v.spec,
                    Err(e) => {
                        outcome.error = Some(format!("invalid spec: {e}"));
                        return outcome;
                    }
                },
            };
            match rank_of_target(&spec, embedder, snapshot, &pair.target_id, cfg) {
                Ok(rank) => outcome.rank = Some(rank),
                Err(e) => outcome.error = Some(e),
            }
            outcome
        })
        .collect();

    let mut warnings = Vec::new();
    for q in &queries {
        if let Some(e) = &q.error {
            let msg = format!("query {} ({}) excluded: {e}", q.index, q.target_id);
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let by_tag = QueryTag::ALL
        .iter()
        .filter_map(|&tag| {
            let ranks: Vec<Rank> = queries.iter().filter(|q| q.tag == tag).filter_map(|q| q.rank).collect();
            TagMetrics::from_ranks(tag.name(), &ranks)
        })
        .collect();
    let all: Vec<Rank> = queries.iter().filter_map(|q| q.rank).collect();
    Ok(BenchmarkReport {
        by_tag,
        overall: TagMetrics::from_ranks("overall", &all),
        excluded: queries.iter().filter(|q| q.rank.is_none()).count(),
        warnings,
        queries,
    })
}

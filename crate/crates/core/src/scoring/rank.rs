//! Facet similarities, weighted fusion and exhaustive corpus ranking.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::chart_type_similarity;
use crate::model::{EmbeddingVector, FacetId, IntentSpec, PerFacet, RankedResult, VectorError};
use crate::scoring::index::IndexSnapshot;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("snapshot is empty")]
    EmptySnapshot,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("no score for weighted facet `{0}`")]
    MissingFacetScore(FacetId),
    #[error("query embedding dimension {actual}, index expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Cosine similarity of two vectors that are unit-norm (or zero for `e_q`).
pub fn facet_similarity(e_q: &EmbeddingVector, e_x: &EmbeddingVector) -> Result<f64, VectorError> {
    if e_q.is_zero() {
        if e_q.dim() != e_x.dim() {
            return Err(VectorError::DimensionMismatch { expected: e_x.dim(), actual: e_q.dim() });
        }
        return Ok(0.0);
    }
    e_q.dot(e_x)
}

/// `Σ_f w_f · s_f` over facets with non-zero weight, in [`FacetId::ALL`] order.
pub fn fuse_scores(spec: &IntentSpec, facet_scores: &BTreeMap<FacetId, f64>) -> Result<f64, RankError> {
    let mut total = 0.0;
    for facet in FacetId::ALL {
        let w = spec.weights.get(facet);
        if w == 0.0 {
            continue;
        }
        let s = facet_scores.get(&facet).ok_or(RankError::MissingFacetScore(facet))?;
        total += w * s;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankOptions {
    pub k: usize,
    /// Keep only records sharing at least one queried chart type. Has no
    /// effect when the spec names no chart types.
    #[serde(default)]
    pub hard_chart_filter: bool,
}

impl RankOptions {
    pub fn top(k: usize) -> Self {
        RankOptions { k, hard_chart_filter: false }
    }
}

/// Descending score, then ascending record id.
pub fn result_order(a: &RankedResult, b: &RankedResult) -> Ordering {
    b.total_score.total_cmp(&a.total_score).then_with(|| a.record_id.cmp(&b.record_id))
}

/// Scores every (optionally filtered) record and returns the top `k`.
pub fn rank_corpus(
    spec: &IntentSpec,
    query_vecs: &PerFacet<EmbeddingVector>,
    snapshot: &IndexSnapshot,
    opts: RankOptions,
) -> Result<Vec<RankedResult>, RankError> {
    if snapshot.is_empty() {
        return Err(RankError::EmptySnapshot);
    }
    if opts.k == 0 {
        return Err(RankError::InvalidK);
    }
    let dim = snapshot.dimension();
    for v in query_vecs.values() {
        if v.dim() != dim {
            return Err(RankError::DimensionMismatch { expected: dim, actual: v.dim() });
        }
    }

    let filter = opts.hard_chart_filter && !spec.chart_types.is_empty();
    let candidates: Vec<_> =
        snapshot.records().iter().filter(|r| !filter || !r.chart_types.is_disjoint(&spec.chart_types)).collect();

    // One score column per facet.
    let mut columns: Vec<(FacetId, Vec<f64>)> = Vec::with_capacity(FacetId::ALL.len());
    for facet in FacetId::ALL {
        let column = if facet == FacetId::ChartType {
            if spec.chart_types.is_empty() {
                vec![0.0; candidates.len()]
            } else {
                candidates
                    .iter()
                    .map(|r| {
                        chart_type_similarity(&spec.chart_types, &r.chart_types, snapshot.kernel())
                            .expect("query and record chart types are non-empty")
                    })
                    .collect()
            }
        } else {
            let q = &query_vecs[facet];
            if q.is_zero() {
                vec![0.0; candidates.len()]
            } else {
                candidates
                    .iter()
                    .map(|r| crate::model::dot(q.as_slice(), r.facet_embeddings[facet].as_slice()))
                    .collect()
            }
        };
        columns.push((facet, column));
    }

    let mut results: Vec<RankedResult> = candidates
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let facet_scores: BTreeMap<FacetId, f64> = columns.iter().map(|(f, col)| (*f, col[i])).collect();
            let total_score = fuse_scores(spec, &facet_scores).expect("every facet is scored");
            RankedResult { record_id: r.id.clone(), total_score, facet_scores }
        })
        .collect();

    results.sort_by(result_order);
    results.truncate(opts.k);
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelTable;
    use crate::model::{normalize, ChartType};
    use crate::scoring::heads::FacetHeads;
    use crate::scoring::index::{build_index, IngestRecord};

    fn unit(v: &[f64]) -> EmbeddingVector {
        normalize(v.to_vec()).unwrap()
    }

    #[test]
    fn similarity_examples() {
        let a = unit(&[1.0, 2.0, 3.0]);
        assert!((facet_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let x = unit(&[1.0, 0.0, 0.0]);
        let y = unit(&[0.0, 1.0, 0.0]);
        assert_eq!(facet_similarity(&x, &y).unwrap(), 0.0);
        assert_eq!(facet_similarity(&EmbeddingVector::zero(3), &a).unwrap(), 0.0);
        assert!(facet_similarity(&EmbeddingVector::zero(2), &a).is_err());
        assert!(facet_similarity(&unit(&[1.0, 1.0]), &a).is_err());
    }

    #[test]
    fn fuse_examples() {
        let mut spec = IntentSpec::default();
        spec.weights.content = 1.0;
        let s = BTreeMap::from([(FacetId::Content, 0.42)]);
        assert_eq!(fuse_scores(&spec, &s).unwrap(), 0.42);

        spec.weights.content = 0.5;
        spec.weights.style = 0.5;
        let s = BTreeMap::from([(FacetId::Content, 0.4), (FacetId::Style, 0.8)]);
        assert!((fuse_scores(&spec, &s).unwrap() - 0.6).abs() < 1e-15);

        let s = BTreeMap::from([(FacetId::Content, 0.4)]);
        assert_eq!(fuse_scores(&spec, &s), Err(RankError::MissingFacetScore(FacetId::Style)));
    }

    fn tiny_snapshot() -> IndexSnapshot {
        let heads = FacetHeads::init(4, 4, 7);
        let recs = [
            ("b", ChartType::BarChart, [1.0, 0.2, 0.0, 0.1]),
            ("a", ChartType::PieChart, [0.0, 1.0, 0.3, 0.0]),
            ("c", ChartType::Histogram, [0.2, 0.1, 1.0, 0.0]),
        ]
        .into_iter()
        .map(|(id, t, v)| {
            IngestRecord {
                id: id.into(),
                chart_types: [t].into_iter().collect(),
                base_embedding: v.to_vec(),
                metadata: Default::default(),
            }
            .stage()
            .unwrap()
        })
        .collect();
        build_index(recs, &heads, KernelTable::default_table()).unwrap()
    }

    fn chart_only(t: ChartType) -> IntentSpec {
        let mut spec = IntentSpec::default();
        spec.chart_types.insert(t);
        spec.weights.chart_type = 1.0;
        spec
    }

    #[test]
    fn chart_only_ranking_uses_kernel_and_id_ties() {
        let snap = tiny_snapshot();
        let zero = PerFacet::from_fn(|_| EmbeddingVector::zero(4));
        let out = rank_corpus(&chart_only(ChartType::BarChart), &zero, &snap, RankOptions::top(10)).unwrap();
        let ids: Vec<_> = out.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
        assert_eq!(out[1].total_score, 0.7);
        assert_eq!(out[2].total_score, 0.0);
        assert_eq!(out[0].facet_scores.len(), 5);

        // Pie vs nothing similar: a wins, b and c tie at 0 and sort by id.
        let out = rank_corpus(&chart_only(ChartType::PieChart), &zero, &snap, RankOptions::top(2)).unwrap();
        let ids: Vec<_> = out.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn hard_filter_keeps_matching_types_only() {
        let snap = tiny_snapshot();
        let zero = PerFacet::from_fn(|_| EmbeddingVector::zero(4));
        let opts = RankOptions { k: 10, hard_chart_filter: true };
        let out = rank_corpus(&chart_only(ChartType::BarChart), &zero, &snap, opts).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].record_id, "b");
    }

    #[test]
    fn errors() {
        let snap = tiny_snapshot();
        let zero = PerFacet::from_fn(|_| EmbeddingVector::zero(4));
        let spec = chart_only(ChartType::BarChart);
        assert_eq!(rank_corpus(&spec, &zero, &snap, RankOptions::top(0)), Err(RankError::InvalidK));
        let wrong = PerFacet::from_fn(|_| EmbeddingVector::zero(3));
        assert!(matches!(
            rank_corpus(&spec, &wrong, &snap, RankOptions::top(1)),
            Err(RankError::DimensionMismatch { .. })
        ));
        let empty = build_index(vec![], &FacetHeads::init(4, 4, 7), KernelTable::identity()).unwrap();
        assert_eq!(rank_corpus(&spec, &zero, &empty, RankOptions::top(1)), Err(RankError::EmptySnapshot));
    }
}

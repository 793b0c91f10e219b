mod common;

use common::*;
use intentrank_core::kernel::{chart_type_similarity, KernelTable};
use intentrank_core::model::{ChartType, FacetId};
use intentrank_core::scoring::{rank_corpus, FacetHeads, RankOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn type_set() -> impl Strategy<Value = std::collections::BTreeSet<ChartType>> {
    prop::collection::btree_set(prop::sample::select(ChartType::ALL.to_vec()), 1..4)
}

#[test]
fn single_record_corpus_ranks_first() {
    let snap = random_snapshot(3, 1, 8, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (spec, vecs) = random_query(&mut rng, 8);
    let out = rank_corpus(&spec, &vecs, &snap, RankOptions::top(5)).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].record_id, snap.records()[0].id);
}

#[test]
fn rebuilding_is_deterministic_and_tracks_heads() {
    let a = random_snapshot(9, 30, 8, 4);
    let b = random_snapshot(9, 30, 8, 4);
    assert_eq!(a.heads_version(), b.heads_version());
    assert_eq!(a.records(), b.records());
    let other = FacetHeads::init(8, 4, 1234);
    assert_ne!(other.version(), a.heads_version());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn matches_brute_force(seed in any::<u64>(), n in 1usize..80, dim in 2usize..12, k in 1usize..100) {
        let snap = random_snapshot(seed, n, dim, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31));
        let (spec, vecs) = random_query(&mut rng, dim);
        let got = rank_corpus(&spec, &vecs, &snap, RankOptions::top(k)).unwrap();
        let want = brute_force(&spec, &vecs, &snap);
        prop_assert_eq!(got.len(), k.min(n));
        for (g, w) in got.iter().zip(&want) {
            prop_assert_eq!(&g.record_id, &w.0);
            prop_assert!((g.total_score - w.1).abs() < 1e-9);
        }
    }

    #[test]
    fn positive_scaling_keeps_order(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let snap = random_snapshot(seed, 40, 6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(!seed);
        let (spec, vecs) = random_query(&mut rng, 6);
        let mut scaled = spec.clone();
        scaled.weights = spec.weights.scaled(c);
        let a = rank_corpus(&spec, &vecs, &snap, RankOptions::top(40)).unwrap();
        let b = rank_corpus(&scaled, &vecs, &snap, RankOptions::top(40)).unwrap();
        let ids = |v: &[intentrank_core::RankedResult]| v.iter().map(|r| r.record_id.clone()).collect::<Vec<_>>();
        prop_assert_eq!(ids(&a), ids(&b));
    }

    #[test]
    fn absent_facets_change_nothing(seed in any::<u64>()) {
        let snap = random_snapshot(seed, 25, 6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let (spec, vecs) = random_query(&mut rng, 6);
        // Absent facets already carry w = 0 and the zero vector; scoring them
        // explicitly (as the full breakdown does) must not move totals.
        let out = rank_corpus(&spec, &vecs, &snap, RankOptions::top(25)).unwrap();
        for r in &out {
            for f in FacetId::EMBEDDING {
                if !spec.is_present(f) {
                    prop_assert_eq!(r.facet_scores[&f], 0.0);
                }
            }
            let present_only: f64 = FacetId::ALL
                .iter()
                .filter(|&&f| spec.weights.get(f) > 0.0)
                .map(|&f| spec.weights.get(f) * r.facet_scores[&f])
                .sum();
            prop_assert!((present_only - r.total_score).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_weights_bound_scores(seed in any::<u64>()) {
        let snap = random_snapshot(seed, 25, 6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 11);
        let (mut spec, vecs) = random_query(&mut rng, 6);
        let sum: f64 = FacetId::ALL.iter().map(|&f| spec.weights.get(f)).sum();
        spec.weights = spec.weights.scaled(1.0 / sum);
        for r in rank_corpus(&spec, &vecs, &snap, RankOptions::top(25)).unwrap() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r.total_score));
            let t = spec.weights.chart_type * r.facet_scores[&FacetId::ChartType];
            prop_assert!(t >= 0.0 && t <= spec.weights.chart_type + 1e-12);
        }
    }

    #[test]
    fn hard_filter_is_exact_overlap(seed in any::<u64>()) {
        let snap = random_snapshot(seed, 40, 6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 5);
        let (mut spec, vecs) = random_query(&mut rng, 6);
        if spec.chart_types.is_empty() {
            spec.chart_types.insert(ChartType::BarChart);
        }
        let opts = RankOptions { k: 40, hard_chart_filter: true };
        let out = rank_corpus(&spec, &vecs, &snap, opts).unwrap();
        let expected = snap.records().iter().filter(|r| !r.chart_types.is_disjoint(&spec.chart_types)).count();
        prop_assert_eq!(out.len(), expected);
    }

    #[test]
    fn kernel_score_is_monotone_and_bounded(q in type_set(), x in type_set(), extra in type_set()) {
        let k = KernelTable::default_table();
        let base = chart_type_similarity(&q, &x, &k).unwrap();
        let mut bigger = x.clone();
        bigger.extend(extra);
        let grown = chart_type_similarity(&q, &bigger, &k).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(grown >= base);
        if q.is_subset(&x) {
            prop_assert_eq!(base, 1.0);
        }
    }
}

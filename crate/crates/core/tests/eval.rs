mod common;

use common::*;
use intentrank_core::eval::*;
use intentrank_core::model::{normalize, EmbeddingVector, FacetId, IntentSpec, PerFacet};
use intentrank_core::query::{ParserConfig, QueryParser};
use intentrank_core::scoring::embedder::facet_prompt;
use intentrank_core::scoring::{FixtureEmbedder, StaticEmbedder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn content_spec(text: &str) -> IntentSpec {
    let mut spec = IntentSpec::default();
    spec.rewrites.content = Some(text.into());
    spec.weights.content = 1.0;
    spec
}

fn parser() -> QueryParser {
    QueryParser::new(ParserConfig { fallback_only: true, ..ParserConfig::default() }).unwrap()
}

#[test]
fn query_equal_to_target_embedding_is_always_first() {
    let snap = random_snapshot(21, 60, 8, 6);
    let mut emb = StaticEmbedder::new(8, 0);
    let mut pairs = Vec::new();
    let key = |r: &intentrank_core::CorpusRecord| format!("{:?}", r.base_embedding);
    let mut copies = std::collections::BTreeMap::new();
    for r in snap.records() {
        *copies.entry(key(r)).or_insert(0) += 1;
    }
    for (i, r) in snap.records().iter().enumerate() {
        // Records sharing a base embedding tie exactly; only unique ones are targets.
        if copies[&key(r)] > 1 {
            continue;
        }
        let text = format!("query {i}");
        emb.insert(facet_prompt(FacetId::Content, &text), r.facet_embeddings[FacetId::Content].as_slice().to_vec());
        pairs.push(QueryTargetPair {
            query: QueryInput::Spec(content_spec(&text)),
            target_id: r.id.clone(),
            tag: QueryTag::SyntheticGeneral,
        });
    }
    assert!(pairs.len() > 40);
    let report = run_benchmark(&pairs, &snap, &parser(), &emb, BenchmarkConfig::default()).unwrap();
    assert_eq!(report.by_tag[0].r_at_1, 1.0);
    assert_eq!(report.excluded, 0);
}

fn oracle_rank(
    spec: &IntentSpec,
    target: &str,
    emb: &FixtureEmbedder,
    snap: &intentrank_core::scoring::IndexSnapshot,
) -> Rank {
    let vecs = PerFacet::from_fn(|f| match spec.rewrites.get(f) {
        Some(text) if !text.trim().is_empty() => normalize(emb.vector(&format!("{}: {}", f.name(), text))).unwrap(),
        _ => EmbeddingVector::zero(snap.dimension()),
    });
    let order = brute_force(spec, &vecs, snap);
    Rank::Hit(order.iter().position(|(id, _)| id == target).unwrap() + 1)
}

#[test]
fn benchmark_matches_brute_force_pipeline() {
    let snap = random_snapshot(77, 200, 16, 8);
    let emb = FixtureEmbedder::new(16, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tags = QueryTag::ALL;
    let mut pairs = Vec::new();
    for i in 0..50 {
        let (mut spec, _) = random_query(&mut rng, 16);
        for f in FacetId::EMBEDDING {
            if spec.rewrites.is_present(f) {
                spec.rewrites.set(f, Some(format!("{f} words {i}")));
            }
        }
        let target = snap.records()[rng.random_range(0..200)].id.clone();
        pairs.push(QueryTargetPair { query: QueryInput::Spec(spec), target_id: target, tag: tags[i % 4] });
    }
    let report = run_benchmark(&pairs, &snap, &parser(), &emb, BenchmarkConfig::default()).unwrap();

    for tag in tags {
        let ranks: Vec<Rank> = pairs
            .iter()
            .filter(|p| p.tag == tag)
            .map(|p| match &p.query {
                QueryInput::Spec(s) => oracle_rank(s, &p.target_id, &emb, &snap),
                QueryInput::Text(_) => unreachable!(),
            })
            .collect();
        let n = ranks.len() as f64;
        let r1 = ranks.iter().filter(|r| matches!(r, Rank::Hit(1))).count() as f64 / n;
        let r5 = ranks.iter().filter(|r| matches!(r, Rank::Hit(p) if *p <= 5)).count() as f64 / n;
        let mut rr = [0usize; 11];
        for r in &ranks {
            if let Rank::Hit(p) = r {
                if *p <= 10 {
                    rr[*p] += 1;
                }
            }
        }
        let mrr = (1..=10).map(|p| rr[p] as f64 / p as f64).sum::<f64>() / n;
        let got = report.by_tag.iter().find(|m| m.tag == tag.name()).unwrap();
        assert_eq!((got.r_at_1, got.r_at_5, got.mrr_at_10), (r1, r5, mrr), "{tag:?}");
    }

    let mut shuffled = pairs.clone();
    shuffled.reverse();
    shuffled.rotate_left(17);
    let again = run_benchmark(&shuffled, &snap, &parser(), &emb, BenchmarkConfig::default()).unwrap();
    assert_eq!(again.by_tag, report.by_tag);
    assert_eq!(again.overall, report.overall);
}

#[test]
fn text_queries_depth_and_failures() {
    let snap = random_snapshot(4, 30, 8, 4);
    let emb = FixtureEmbedder::new(8, 1);
    let target = snap.records()[0].id.clone();
    let pairs = vec![
        QueryTargetPair {
            query: QueryInput::Text("pie chart of rainfall".into()),
            target_id: target.clone(),
            tag: QueryTag::HumanShort,
        },
        QueryTargetPair { query: QueryInput::Text("   ".into()), target_id: target.clone(), tag: QueryTag::HumanLong },
    ];
    let cfg = BenchmarkConfig { list_depth: Some(1), hard_chart_filter: false };
    let report = run_benchmark(&pairs, &snap, &parser(), &emb, cfg).unwrap();
    assert_eq!(report.excluded, 1);
    assert_eq!(report.warnings.len(), 1);
    assert!(matches!(report.queries[0].rank, Some(Rank::Hit(1)) | Some(Rank::Miss)));
    assert!(report.by_tag.iter().all(|m| m.tag != "human-long"));

    let bad = vec![QueryTargetPair {
        query: QueryInput::Text("x".into()),
        target_id: "nope".into(),
        tag: QueryTag::HumanShort,
    }];
    assert!(matches!(
        run_benchmark(&bad, &snap, &parser(), &emb, BenchmarkConfig::default()),
        Err(EvalError::UnresolvableTarget { index: 0, .. })
    ));

    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    let json: BenchmarkReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json, report);
    assert!(std::fs::read_to_string(dir.path().join("report.txt")).unwrap().contains("human-short"));
}

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use intentrank_core::scoring::{embed_query_facets, rank_corpus, FixtureEmbedder, RankOptions};
use intentrank_core::{validate_intent_spec, ChartType, FacetId, IntentSpec, WeightPolicy};
use intentrank_service::app::{AutoSelectRequest, SearchRequest, SpecEdits};
use intentrank_service::select::SelectionSource;
use intentrank_service::session::VersionSource;
use intentrank_service::ServiceError;
use intentrank_svg::{canonicalize, SummaryOptions};

use common::{build_snapshot, fixture, DIM};

fn spec_with_style() -> IntentSpec {
    let mut spec = IntentSpec::default();
    spec.rewrites.set(FacetId::Content, Some("coffee consumption by country".into()));
    spec.rewrites.set(FacetId::Style, Some("dark neon".into()));
    spec.chart_types.insert(ChartType::BarChart);
    spec.weights.set(FacetId::Content, 1.0);
    spec.weights.set(FacetId::ChartType, 1.0);
    spec.weights.set(FacetId::Style, 0.0);
    spec
}

fn ids(v: &[String]) -> Vec<String> {
    v.to_vec()
}

fn s(x: &str) -> String {
    x.to_string()
}

#[test]
fn weight_edit_matches_library_ranking() {
    let fx = fixture(40);
    let app = fx.app();
    let first = app
        .search(&SearchRequest {
            session_id: Some(s("w")),
            spec: Some(spec_with_style()),
            k: Some(40),
            ..Default::default()
        })
        .unwrap();
    let mut edits = SpecEdits::default();
    edits.weights.insert(FacetId::Style, 5.0);
    let edited = app
        .search(&SearchRequest { session_id: Some(s("w")), edits: Some(edits), k: Some(40), ..Default::default() })
        .unwrap();

    let mut expected_spec = spec_with_style();
    expected_spec.weights.set(FacetId::Style, 5.0);
    let expected_spec = validate_intent_spec(expected_spec, WeightPolicy::Coerce).unwrap().spec;
    let snap = app.snapshot();
    let emb = FixtureEmbedder::new(DIM, 0);
    let vecs = embed_query_facets(&expected_spec, &emb).unwrap();
    let direct = rank_corpus(&expected_spec, &vecs, &snap, RankOptions::top(40)).unwrap();

    assert_eq!(edited.spec, expected_spec);
    assert_eq!(edited.results, direct);
    assert_ne!(
        first.results.iter().map(|r| &r.record_id).collect::<Vec<_>>(),
        edited.results.iter().map(|r| &r.record_id).collect::<Vec<_>>()
    );
}

#[test]
fn identical_requests_give_identical_responses() {
    let fx = fixture(20);
    let app = fx.app();
    let req = SearchRequest { query: Some(s("a pastel bar chart about coffee with flat icons")), ..Default::default() };
    let a = serde_json::to_string(&app.search(&req).unwrap()).unwrap();
    let b = serde_json::to_string(&app.search(&req).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn hard_filter_keeps_only_matching_chart_types() {
    let fx = fixture(40);
    let app = fx.app();
    let mut spec = spec_with_style();
    spec.chart_types = [ChartType::BarChart].into_iter().collect();
    let res = app
        .search(&SearchRequest { spec: Some(spec), k: Some(40), hard_chart_filter: true, ..Default::default() })
        .unwrap();
    assert!(!res.results.is_empty());
    let snap = app.snapshot();
    for r in &res.results {
        assert!(snap.get(&r.record_id).unwrap().chart_types.contains(&ChartType::BarChart));
    }
}

#[test]
fn session_search_without_spec_is_rejected() {
    let fx = fixture(5);
    let app = fx.app();
    let err = app
        .search(&SearchRequest {
            session_id: Some(s("fresh")),
            edits: Some(SpecEdits::default()),
            ..Default::default()
        })
        .unwrap_err();
    assert!(matches!(err, ServiceError::NoCurrentSpec(_)));
}

#[test]
fn commit_semantics() {
    let fx = fixture(12);
    let app = fx.app();
    assert_eq!(app.commit("c", &[s("r001")]).unwrap(), ids(&[s("r001")]));
    assert_eq!(app.commit("c", &[s("r001"), s("r002")]).unwrap(), ids(&[s("r001"), s("r002")]));
    let err = app.commit("c", &[s("r003"), s("nope")]).unwrap_err();
    assert!(matches!(err, ServiceError::UnknownRecordId(ref id) if id == "nope"));
    assert_eq!(app.commits("c").unwrap(), ids(&[s("r001"), s("r002")]));
    assert_eq!(app.remove("c", &[s("r001"), s("r009")]).unwrap(), ids(&[s("r002")]));

    let many: Vec<String> = (0..9).map(|i| format!("r{i:03}")).collect();
    let err = app.commit("c", &many).unwrap_err();
    assert!(matches!(err, ServiceError::CommitCapExceeded { cap: 8 }));
    assert_eq!(app.commits("c").unwrap(), ids(&[s("r002")]));
    assert!(matches!(app.commit("../x", &[s("r001")]), Err(ServiceError::InvalidSessionId(_))));
}

#[test]
fn session_state_survives_restart() {
    let fx = fixture(12);
    let before = {
        let app = fx.app();
        app.search(&SearchRequest {
            session_id: Some(s("p")),
            query: Some(s("pie chart about vaccination")),
            ..Default::default()
        })
        .unwrap();
        let mut edits = SpecEdits::default();
        edits.weights.insert(FacetId::Content, 3.0);
        app.search(&SearchRequest { session_id: Some(s("p")), edits: Some(edits), ..Default::default() }).unwrap();
        app.commit("p", &[s("r004"), s("r000")]).unwrap();
        app.svg_show("p", "r000", "0.3", None).unwrap();
        let mut e = BTreeMap::new();
        e.insert(s("0.2"), s(r##"<g id="chart"><rect width="5" height="5" fill="#000"/></g>"##));
        app.svg_stitch("p", "r000", &e, None).unwrap();
        app.commit("q", &[s("r001")]).unwrap();
        app.remove("q", &[s("r001")]).unwrap();
        (app.session_state("p").unwrap(), app.session_state("q").unwrap())
    };
    let app = fx.app();
    assert_eq!(app.session_state("p").unwrap(), before.0);
    assert_eq!(app.session_state("q").unwrap(), before.1);
    assert_eq!(app.health().sessions, 2);
}

#[test]
fn svg_endpoints_version_outputs() {
    let fx = fixture(6);
    let app = fx.app();
    assert!(matches!(app.svg_summarize("v", "r001", SummaryOptions::default()), Err(ServiceError::NotCommitted(_))));
    app.commit("v", &[s("r001")]).unwrap();

    let summary = app.svg_summarize("v", "r001", SummaryOptions::default()).unwrap();
    assert_eq!(summary.version, 0);
    assert_eq!(summary.tree.root.tag, "svg");

    let shown = app.svg_show("v", "r001", "0.3", Some(&summary.tree.document_hash)).unwrap();
    assert_eq!(shown.snippet.placeholder_tokens.len(), 1);
    assert!(!shown.snippet.code.contains("base64"));

    let v1 = app.svg_stitch("v", "r001", &BTreeMap::new(), None).unwrap();
    assert_eq!(v1.version, 1);
    let t0 = app.svg_version_text("v", "r001", 0).unwrap();
    let t1 = app.svg_version_text("v", "r001", 1).unwrap();
    assert_eq!(canonicalize(&t0).unwrap(), canonicalize(&t1).unwrap());

    let mut edits = BTreeMap::new();
    edits.insert(s("0.3"), shown.snippet.code.replace("width=\"80\"", "width=\"40\""));
    let v2 = app.svg_stitch("v", "r001", &edits, Some(&shown.document_hash)).unwrap();
    assert_eq!(v2.version, 2);
    let t2 = app.svg_version_text("v", "r001", 2).unwrap();
    assert!(t2.contains("width=\"40\"") && t2.contains("base64,"));

    // Node ids from version 0 no longer apply.
    let stale = app.svg_stitch("v", "r001", &edits, Some(&shown.document_hash)).unwrap_err();
    assert_eq!(stale.code(), "unknown_node_id");

    let versions = app.svg_versions("v", "r001").unwrap();
    assert_eq!(versions.iter().map(|v| v.version).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(versions.windows(2).all(|w| w[0].created_at <= w[1].created_at));
    assert_eq!(versions[2].edited_nodes, vec![s("0.3")]);
}

#[test]
fn propose_applies_backend_edits() {
    let fx = fixture(4);
    let editor = |tree: &intentrank_svg::SvgSummaryTree, msg: &str| {
        assert_eq!(msg, "make the title red");
        assert_eq!(tree.root.node_id, "0");
        let mut e = BTreeMap::new();
        e.insert(s("0.1"), s(r#"<g id="header"><text fill="red">Title</text></g>"#));
        Ok(e)
    };
    let app = fx.app().with_editor(Arc::new(editor));
    app.commit("e", &[s("r002")]).unwrap();
    let out = app.svg_propose("e", "r002", "make the title red").unwrap();
    assert_eq!(out.version.version, 1);
    assert_eq!(out.version.source, VersionSource::Propose);
    assert!(app.svg_version_text("e", "r002", 1).unwrap().contains(r#"fill="red""#));

    let bad = |_: &intentrank_svg::SvgSummaryTree, _: &str| {
        let mut e = BTreeMap::new();
        e.insert(s("0.1"), s("<g><unclosed></g>"));
        Ok(e)
    };
    let app = fx.app().with_editor(Arc::new(bad));
    assert_eq!(app.svg_propose("e", "r002", "x").unwrap_err().code(), "malformed_replacement");
    assert_eq!(app.svg_versions("e", "r002").unwrap().len(), 2);
}

#[test]
fn auto_select_uses_session_spec() {
    let fx = fixture(20);
    let app = fx.app();
    assert!(matches!(app.auto_select("a", &AutoSelectRequest::default()), Err(ServiceError::NoCurrentSpec(_))));
    app.search(&SearchRequest { session_id: Some(s("a")), spec: Some(spec_with_style()), ..Default::default() })
        .unwrap();
    let sel = app.auto_select("a", &AutoSelectRequest::default()).unwrap();
    assert_eq!(sel.source, SelectionSource::Fallback);
    assert_eq!(sel.record_ids.len(), 3);
    let top = app.session("a").unwrap().history[0].top_ids.clone();
    assert_eq!(sel.record_ids[0], top[0]);
    assert!(app.commits("a").unwrap().is_empty());
}

#[test]
fn searches_keep_their_snapshot_across_swaps() {
    let fx = fixture(30);
    let app = Arc::new(fx.app());
    let old = app.snapshot();
    let new = build_snapshot(&fx.corpus(), 99);
    let new_version = new.heads_version().to_string();
    assert_ne!(old.heads_version(), new_version);

    let req = SearchRequest { spec: Some(spec_with_style()), k: Some(30), ..Default::default() };
    let before = app.search(&req).unwrap();
    let workers: Vec<_> = (0..4)
        .map(|_| {
            let app = app.clone();
            let req = req.clone();
            std::thread::spawn(move || (0..20).map(|_| app.search(&req).unwrap()).collect::<Vec<_>>())
        })
        .collect();
    app.swap_snapshot(new).unwrap();
    let after = app.search(&req).unwrap();
    assert_eq!(after.heads_version, new_version);

    // The handle taken before the swap is untouched.
    assert_eq!(old.heads_version(), before.heads_version);
    for w in workers {
        for r in w.join().unwrap() {
            if r.heads_version == before.heads_version {
                assert_eq!(r.results, before.results);
            } else {
                assert_eq!(r.results, after.results);
            }
        }
    }
}

#[test]
fn reindex_reloads_from_disk() {
    let fx = fixture(10);
    let app = fx.app();
    let other = fx.dir.path().join("other-index");
    build_snapshot(&fx.corpus(), 3).save(&other).unwrap();
    let report = app.reindex(Some(&other)).unwrap();
    assert_eq!(report.records, 10);
    assert_eq!(report.heads_version, app.snapshot().heads_version());
}

#![allow(dead_code)]

use std::collections::BTreeSet;

use intentrank_core::kernel::KernelTable;
use intentrank_core::model::{normalize, ChartType, EmbeddingVector, FacetId, IntentSpec, PerFacet};
use intentrank_core::scoring::{build_index, FacetHeads, IndexSnapshot, IngestRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The shipped default pairs, restated independently of the kernel module.
pub const DEFAULT_PAIRS: [(ChartType, ChartType, f64); 5] = [
    (ChartType::AreaChart, ChartType::LineChart, 0.6),
    (ChartType::PieChart, ChartType::GaugeChart, 0.5),
    (ChartType::BarChart, ChartType::Histogram, 0.7),
    (ChartType::BarChart, ChartType::PyramidChart, 0.4),
    (ChartType::Treemap, ChartType::Diagram, 0.3),
];

pub fn kappa(a: ChartType, b: ChartType) -> f64 {
    if a == b {
        return 1.0;
    }
    DEFAULT_PAIRS.iter().find(|(x, y, _)| (*x == a && *y == b) || (*x == b && *y == a)).map_or(0.0, |p| p.2)
}

pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Ok(u) = normalize(v) {
            return u.into_inner();
        }
    }
}

pub fn random_types(rng: &mut ChaCha8Rng, min: usize, max: usize) -> BTreeSet<ChartType> {
    let n = rng.random_range(min..=max);
    let mut out = BTreeSet::new();
    while out.len() < n {
        out.insert(ChartType::ALL[rng.random_range(0..13)]);
    }
    out
}

/// A random corpus; roughly one record in eight duplicates an earlier base
/// embedding so that exact score ties occur.
pub fn random_snapshot(seed: u64, n: usize, dim: usize, hidden: usize) -> IndexSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let base = if i > 0 && rng.random_ratio(1, 8) {
            bases[rng.random_range(0..i)].clone()
        } else {
            random_unit(&mut rng, dim)
        };
        bases.push(base.clone());
        let rec = IngestRecord {
            id: format!("r{:04}", rng.random_range(0..100_000) * 1000 + i),
            chart_types: random_types(&mut rng, 1, 3),
            base_embedding: base,
            metadata: Default::default(),
        };
        records.push(rec.stage().unwrap());
    }
    let heads = FacetHeads::init(dim, hidden, seed ^ 0xabcdef);
    build_index(records, &heads, KernelTable::default_table()).unwrap()
}

/// A random valid spec and matching query vectors (zero for absent facets).
pub fn random_query(rng: &mut ChaCha8Rng, dim: usize) -> (IntentSpec, PerFacet<EmbeddingVector>) {
    loop {
        let mut spec = IntentSpec::default();
        let mut vecs = PerFacet::from_fn(|_| EmbeddingVector::zero(dim));
        for f in FacetId::EMBEDDING {
            if rng.random_bool(0.6) {
                spec.rewrites.set(f, Some(format!("{f} text")));
                spec.weights.set(f, if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..1.0) });
                vecs[f] = EmbeddingVector::from_unit(random_unit(rng, dim)).unwrap();
            }
        }
        if rng.random_bool(0.6) {
            spec.chart_types = random_types(rng, 1, 3);
            spec.weights.chart_type = rng.random_range(0.0..1.0);
        }
        if FacetId::ALL.iter().any(|&f| spec.weights.get(f) > 0.0) {
            return (spec, vecs);
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Straight-line scorer: every record, every facet, weighted sum, sort.
pub fn brute_force(spec: &IntentSpec, vecs: &PerFacet<EmbeddingVector>, snap: &IndexSnapshot) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = snap
        .records()
        .iter()
        .map(|r| {
            let mut total = 0.0;
            for f in FacetId::ALL {
                let w = spec.weights.get(f);
                if w == 0.0 {
                    continue;
                }
                let s = if f == FacetId::ChartType {
                    let mut acc = 0.0;
                    for &t in &spec.chart_types {
                        acc += r.chart_types.iter().map(|&u| kappa(t, u)).fold(0.0, f64::max);
                    }
                    acc / spec.chart_types.len() as f64
                } else {
                    dot(vecs[f].as_slice(), r.facet_embeddings[f].as_slice())
                };
                total += w * s;
            }
            (r.id.clone(), total)
        })
        .collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}

//! Small demo corpus: ingest records, one SVG per record (each carrying an
//! embedded raster payload) and a matching query/target pair file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use base64::Engine;
use intentrank_core::eval::{QueryInput, QueryTag, QueryTargetPair};
use intentrank_core::scoring::{FixtureEmbedder, IngestRecord};
use intentrank_core::ChartType;

use crate::app::SVG_PATH_KEY;

const TOPICS: [&str; 8] = [
    "renewable energy adoption",
    "coffee consumption by country",
    "global smartphone sales",
    "ocean plastic pollution",
    "urban population growth",
    "remote work trends",
    "vaccination coverage",
    "household spending on food",
];
const LAYOUTS: [&str; 4] = ["single column", "two column grid", "radial", "horizontal timeline"];
const ILLUSTRATIONS: [&str; 4] = ["flat icons", "hand drawn people", "isometric buildings", "no illustration"];
const STYLES: [&str; 4] = ["pastel", "dark neon", "monochrome blue", "warm earthy"];
const PALETTES: [[&str; 3]; 4] = [
    ["#f7c5cc", "#c5e3f7", "#d8f7c5"],
    ["#39ff14", "#ff2079", "#04d9ff"],
    ["#0b3d91", "#4a78c2", "#a9c4eb"],
    ["#a0522d", "#d2a679", "#6b8e23"],
];

#[derive(Debug, Clone, Copy)]
pub struct SynthOptions {
    pub records: usize,
    pub dim: usize,
    pub seed: u64,
}

pub struct SynthRecord {
    pub ingest: IngestRecord,
    pub description: String,
    pub svg: String,
}

fn pick<T: Copy>(items: &[T], i: usize, salt: u64, seed: u64) -> T {
    let h = (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt.wrapping_add(seed);
    items[(h.rotate_left(17) % items.len() as u64) as usize]
}

fn fake_png(i: usize, seed: u64) -> String {
    let bytes: Vec<u8> =
        (0..600u64).map(|k| ((k.wrapping_mul(131) ^ (i as u64).wrapping_mul(7919) ^ seed) % 251) as u8).collect();
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn render_svg(i: usize, seed: u64, title: &str, chart: ChartType, style: usize) -> String {
    let palette = PALETTES[style];
    let mut bars = String::new();
    for (k, colour) in palette.iter().enumerate() {
        let h = 40 + ((i * 37 + k * 53) % 120);
        let _ = write!(bars, r#"<rect x="{}" y="{}" width="60" height="{h}" fill="{colour}"/>"#, 60 + k * 90, 260 - h);
    }
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="400" height="320" viewBox="0 0 400 320">"#,
            r#"<defs><style>.title {{ font: bold 18px sans-serif; fill: {fg}; }}</style></defs>"#,
            r#"<g id="header"><text class="title" x="20" y="30">{title}</text><text x="20" y="50">{chart}</text></g>"#,
            r#"<g id="chart">{bars}</g>"#,
            r#"<g id="illustration"><image x="300" y="10" width="80" height="80" xlink:href="data:image/png;base64,{png}"/></g>"#,
            r#"</svg>"#
        ),
        fg = palette[0],
        title = title,
        chart = chart.name(),
        bars = bars,
        png = fake_png(i, seed),
    )
}

/// Deterministic records `r000`, `r001`, ... whose SVGs live at `svgs/<id>.svg`.
pub fn synth_records(opts: SynthOptions) -> Vec<SynthRecord> {
    let emb = FixtureEmbedder::new(opts.dim, opts.seed);
    (0..opts.records)
        .map(|i| {
            let id = format!("r{i:03}");
            let topic = pick(&TOPICS, i, 1, opts.seed);
            let layout = pick(&LAYOUTS, i, 2, opts.seed);
            let illustration = pick(&ILLUSTRATIONS, i, 3, opts.seed);
            let style_idx = pick(&[0usize, 1, 2, 3], i, 4, opts.seed);
            let chart = ChartType::ALL[i % ChartType::ALL.len()];
            let mut chart_types: std::collections::BTreeSet<ChartType> = [chart].into_iter().collect();
            if i % 5 == 0 {
                chart_types.insert(ChartType::ALL[(i / 5) % ChartType::ALL.len()]);
            }
            let description =
                format!("{topic}; {layout} layout; {illustration}; {} style; {}", STYLES[style_idx], chart.name());
            let mut metadata = BTreeMap::new();
            metadata.insert(SVG_PATH_KEY.to_string(), format!("../svgs/{id}.svg"));
            metadata.insert("title".to_string(), topic.to_string());
            metadata.insert("description".to_string(), description.clone());
            let svg = render_svg(i, opts.seed, topic, chart, style_idx);
            SynthRecord {
                ingest: IngestRecord { id, chart_types, base_embedding: emb.vector(&description), metadata },
                description,
                svg,
            }
        })
        .collect()
}

/// Writes `corpus.jsonl`, `pairs.jsonl` and `svgs/` under `dir`. The SVG
/// paths are relative to `dir/index`, where the index is expected to go.
pub fn write_synth_corpus(dir: &Path, opts: SynthOptions) -> std::io::Result<usize> {
    let records = synth_records(opts);
    std::fs::create_dir_all(dir.join("svgs"))?;
    let mut corpus = std::io::BufWriter::new(std::fs::File::create(dir.join("corpus.jsonl"))?);
    let mut pairs = std::io::BufWriter::new(std::fs::File::create(dir.join("pairs.jsonl"))?);
    for r in &records {
        std::fs::write(dir.join("svgs").join(format!("{}.svg", r.ingest.id)), &r.svg)?;
        serde_json::to_writer(&mut corpus, &r.ingest)?;
        corpus.write_all(b"\n")?;
        let pair = QueryTargetPair {
            query: QueryInput::Text(format!("an infographic about {}", r.description)),
            target_id: r.ingest.id.clone(),
            tag: QueryTag::SyntheticMultifacet,
        };
        serde_json::to_writer(&mut pairs, &pair)?;
        pairs.write_all(b"\n")?;
    }
    corpus.flush()?;
    pairs.flush()?;
    Ok(records.len())
}

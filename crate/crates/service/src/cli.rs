//! Command-line interface.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use intentrank_core::alignment::{
    caption_recall_at_1, gradcheck, make_synthetic_alignment_set, read_alignment_jsonl, train_heads, GradcheckConfig,
    SyntheticConfig, TrainConfig,
};
use intentrank_core::eval::{read_pairs_jsonl, run_benchmark, BenchmarkConfig};
use intentrank_core::kernel::{load_kernel_table, KernelTable};
use intentrank_core::query::QueryParser;
use intentrank_core::scoring::heads::DEFAULT_HIDDEN;
use intentrank_core::scoring::index::{read_corpus_jsonl, write_corpus_jsonl};
use intentrank_core::scoring::{build_index, embed_query_facets, rank_corpus, FacetHeads, IndexSnapshot, RankOptions};
use intentrank_core::{validate_intent_spec, IntentSpec, WeightPolicy};
use intentrank_svg::{show_full_svg, stitch_back, summarize_with, Granularity, SummaryOptions, SvgDocument};

use crate::app::{cli_vault, App};
use crate::config::ServiceConfig;
use crate::synth::{write_synth_corpus, SynthOptions};

#[derive(Debug, Parser)]
#[command(name = "intentrank", version, about = "Intent-aware infographic exemplar retrieval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a raw corpus JSONL file and write it back with unit-norm embeddings.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project a corpus through the facet heads and save an index snapshot.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Trained heads; freshly initialized heads are used when absent.
        #[arg(long)]
        heads: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_HIDDEN)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        kernel_table: Option<PathBuf>,
    },
    /// Rank the index for a query or an explicit spec.
    Search {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, conflicts_with = "spec")]
        query: Option<String>,
        /// JSON file holding an IntentSpec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        hard_filter: bool,
    },
    /// Parse a query into a facet specification.
    ParseQuery {
        query: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the facet projection heads.
    TrainHeads(TrainArgs),
    /// Finite-difference check of the analytic head gradients.
    Gradcheck {
        /// Run one configuration instead of the built-in suite.
        #[arg(long, requires_all = ["dim", "hidden"])]
        batch: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Run the retrieval benchmark over a pair file.
    Eval {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        hard_filter: bool,
    },
    /// SVG summarize / show / stitch.
    #[command(subcommand)]
    Svg(SvgCommand),
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Write a small demo corpus (records, SVGs and query pairs).
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        records: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct EnvArgs {
    /// Service config supplying the embedder and parser settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Index directory; overrides the config.
    #[arg(long)]
    index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSONL alignment examples.
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Generate this many synthetic images instead of reading data.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 0.07)]
    temperature: f64,
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the per-epoch training log as JSON.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SvgCommand {
    /// Print the structural summary as JSON.
    Summarize {
        file: PathBuf,
        #[arg(long)]
        all_elements: bool,
    },
    /// Print one node's source with large payloads replaced by placeholders.
    Show {
        file: PathBuf,
        #[arg(long)]
        node: String,
        /// Defaults to `<file>.vault`.
        #[arg(long)]
        vault: Option<PathBuf>,
    },
    /// Apply node-addressed replacements and write the result.
    Stitch {
        file: PathBuf,
        /// JSON object mapping node ids to replacement code.
        #[arg(long)]
        edits: PathBuf,
        #[arg(long)]
        vault: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig> {
    match path {
        Some(p) => ServiceConfig::load(p).map_err(anyhow::Error::msg),
        None => Ok(ServiceConfig::default()),
    }
}

fn default_vault(file: &Path) -> PathBuf {
    let mut s = file.as_os_str().to_owned();
    s.push(".vault");
    PathBuf::from(s)
}

fn gradcheck_suite(seed: u64) -> Vec<GradcheckConfig> {
    let mut out = Vec::new();
    for batch in [2, 4] {
        for dim in [8, 16] {
            for hidden in [4, 8] {
                out.push(GradcheckConfig { batch, dim, hidden, seed: seed + out.len() as u64, ..Default::default() });
            }
        }
    }
    out.push(GradcheckConfig { batch: 3, dim: 8, hidden: 4, temperature: 0.5, seed: seed + 100, ..Default::default() });
    out.push(GradcheckConfig {
        batch: 4,
        dim: 16,
        hidden: 8,
        temperature: 1.0,
        seed: seed + 101,
        ..Default::default()
    });
    out
}

fn run_inner(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Ingest { input, out } => {
            let file = std::fs::File::open(&input).with_context(|| input.display().to_string())?;
            let staged = read_corpus_jsonl(BufReader::new(file))?;
            write_corpus_jsonl(&staged, std::fs::File::create(&out)?)?;
            log::info!("staged {} records into {}", staged.len(), out.display());
        }
        Command::Index { corpus, out, heads, hidden, seed, kernel_table } => {
            let file = std::fs::File::open(&corpus).with_context(|| corpus.display().to_string())?;
            let staged = read_corpus_jsonl(BufReader::new(file))?;
            let dim = staged.first().map(|r| r.base_embedding.dim()).context("corpus is empty")?;
            let heads = match heads {
                Some(p) => FacetHeads::load(&p)?,
                None => FacetHeads::init(dim, hidden, seed),
            };
            let kernel = match kernel_table {
                Some(p) => load_kernel_table(p)?,
                None => KernelTable::default_table(),
            };
            let snapshot = build_index(staged, &heads, kernel)?;
            snapshot.save(&out)?;
            print_json(&snapshot.manifest())?;
        }
        Command::Search { env, query, spec, k, hard_filter } => {
            let mut cfg = load_config(env.config.as_deref())?;
            if let Some(dir) = env.index {
                cfg.index_dir = dir;
            }
            let snapshot = IndexSnapshot::load(&cfg.index_dir)?;
            let embedder = cfg.embedder.build(snapshot.dimension())?;
            let spec = match (query, spec) {
                (Some(q), _) => QueryParser::new(cfg.parser.clone())?.parse(&q)?.0,
                (None, Some(p)) => {
                    let raw: IntentSpec = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
                    validate_intent_spec(raw, WeightPolicy::Coerce)?.spec
                }
                (None, None) => bail!("pass --query or --spec"),
            };
            let vecs = embed_query_facets(&spec, embedder.as_ref())?;
            let results = rank_corpus(&spec, &vecs, &snapshot, RankOptions { k, hard_chart_filter: hard_filter })?;
            print_json(&serde_json::json!({ "spec": spec, "results": results }))?;
        }
        Command::ParseQuery { query, config } => {
            let cfg = load_config(config.as_deref())?;
            let (spec, trace) = QueryParser::new(cfg.parser)?.parse(&query)?;
            print_json(&serde_json::json!({ "spec": spec, "trace": trace }))?;
        }
        Command::TrainHeads(a) => {
            let dataset = match (&a.data, a.synthetic) {
                (Some(p), _) => read_alignment_jsonl(p)?,
                (None, Some(n)) => {
                    make_synthetic_alignment_set(SyntheticConfig::new(n, a.clusters, a.dim, a.seed))?.examples
                }
                (None, None) => bail!("pass --data or --synthetic"),
            };
            let cfg = TrainConfig {
                batch_size: a.batch_size,
                temperature: a.temperature,
                learning_rate: a.lr,
                momentum: a.momentum,
                epochs: a.epochs,
                seed: a.seed,
                hidden: a.hidden,
            };
            let (heads, log) = train_heads(&dataset, &cfg)?;
            for e in &log.epochs {
                log::info!("epoch {:>3}  mean loss {:.6}", e.epoch, e.mean_loss);
            }
            for (facet, r) in caption_recall_at_1(&dataset, &heads)?.iter() {
                log::info!("caption recall@1 {:<12} {r:.4}", facet.name());
            }
            heads.save(&a.out)?;
            if let Some(p) = &a.log {
                std::fs::write(p, serde_json::to_string_pretty(&log)?)?;
            }
            println!("{}", heads.version());
        }
        Command::Gradcheck { batch, dim, hidden, seed, tolerance } => {
            let configs = match (batch, dim, hidden) {
                (Some(batch), Some(dim), Some(hidden)) => {
                    vec![GradcheckConfig { batch, dim, hidden, seed, ..Default::default() }]
                }
                _ => gradcheck_suite(seed),
            };
            let mut ok = true;
            for cfg in configs {
                let r = gradcheck(cfg)?;
                let pass = r.max_relative_error < tolerance;
                ok &= pass;
                println!(
                    "{} B={} d={} h={} tau={} params={} max_rel_err={:.3e}",
                    if pass { "PASS" } else { "FAIL" },
                    cfg.batch,
                    cfg.dim,
                    cfg.hidden,
                    cfg.temperature,
                    r.params_checked,
                    r.max_relative_error
                );
            }
            return Ok(ok);
        }
        Command::Eval { env, pairs, out, depth, hard_filter } => {
            let mut cfg = load_config(env.config.as_deref())?;
            if let Some(dir) = env.index {
                cfg.index_dir = dir;
            }
            let snapshot = IndexSnapshot::load(&cfg.index_dir)?;
            let embedder = cfg.embedder.build(snapshot.dimension())?;
            let parser = QueryParser::new(cfg.parser.clone())?;
            let file = std::fs::File::open(&pairs).with_context(|| pairs.display().to_string())?;
            let pairs = read_pairs_jsonl(BufReader::new(file))?;
            let report = run_benchmark(
                &pairs,
                &snapshot,
                &parser,
                embedder.as_ref(),
                BenchmarkConfig { list_depth: depth, hard_chart_filter: hard_filter },
            )?;
            report.write(&out)?;
            print!("{}", report.to_text());
        }
        Command::Svg(cmd) => run_svg(cmd)?,
        Command::Serve { port, config, host } => {
            let cfg = ServiceConfig::load(&config).map_err(anyhow::Error::msg)?;
            let app = Arc::new(App::from_config(cfg)?);
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            tokio::runtime::Runtime::new()?.block_on(crate::http::serve(app, addr))?;
        }
        Command::SynthCorpus { out, records, dim, seed } => {
            let n = write_synth_corpus(&out, SynthOptions { records, dim, seed })?;
            log::info!("wrote {n} records to {}", out.display());
        }
    }
    Ok(true)
}

fn run_svg(cmd: SvgCommand) -> Result<()> {
    match cmd {
        SvgCommand::Summarize { file, all_elements } => {
            let text = std::fs::read_to_string(&file)?;
            let granularity = if all_elements { Granularity::AllElements } else { Granularity::Containers };
            let (_, tree, _) = summarize_with(&text, SummaryOptions { granularity })?;
            print_json(&tree)?;
        }
        SvgCommand::Show { file, node, vault } => {
            let doc = SvgDocument::parse(std::fs::read_to_string(&file)?)?;
            let vault_path = vault.unwrap_or_else(|| default_vault(&file));
            let mut v = cli_vault(&doc, &vault_path, intentrank_svg::DEFAULT_PAYLOAD_THRESHOLD)?;
            let snippet = show_full_svg(&doc, &node, &mut v)?;
            v.save(&vault_path)?;
            print_json(&snippet)?;
        }
        SvgCommand::Stitch { file, edits, vault, out } => {
            let doc = SvgDocument::parse(std::fs::read_to_string(&file)?)?;
            let edits: BTreeMap<String, String> = serde_json::from_str(&std::fs::read_to_string(&edits)?)?;
            let vault_path = vault.unwrap_or_else(|| default_vault(&file));
            let v = cli_vault(&doc, &vault_path, intentrank_svg::DEFAULT_PAYLOAD_THRESHOLD)?;
            let stitched = stitch_back(&doc, &edits, &v)?;
            std::fs::write(&out, stitched.text())?;
            log::info!("wrote {} ({})", out.display(), stitched.hash_hex());
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> ExitCode {
    match run_inner(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

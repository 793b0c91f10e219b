#![allow(dead_code)]

use std::io::BufReader;
use std::path::{Path, PathBuf};

use intentrank_core::kernel::KernelTable;
use intentrank_core::scoring::index::read_corpus_jsonl;
use intentrank_core::scoring::{build_index, FacetHeads, IndexSnapshot};
use intentrank_service::synth::{write_synth_corpus, SynthOptions};
use intentrank_service::{App, ServiceConfig};
use tempfile::TempDir;

pub const DIM: usize = 16;

pub struct Fixture {
    pub dir: TempDir,
    pub cfg: ServiceConfig,
}

pub fn build_snapshot(corpus: &Path, heads_seed: u64) -> IndexSnapshot {
    let staged = read_corpus_jsonl(BufReader::new(std::fs::File::open(corpus).unwrap())).unwrap();
    build_index(staged, &FacetHeads::init(DIM, 8, heads_seed), KernelTable::default_table()).unwrap()
}

/// A demo corpus with an index at `<tmp>/data/index` and sessions at `<tmp>/sessions`.
pub fn fixture(records: usize) -> Fixture {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    write_synth_corpus(&data, SynthOptions { records, dim: DIM, seed: 5 }).unwrap();
    build_snapshot(&data.join("corpus.jsonl"), 7).save(data.join("index")).unwrap();
    let cfg = ServiceConfig {
        index_dir: data.join("index"),
        session_dir: dir.path().join("sessions"),
        ..ServiceConfig::default()
    };
    Fixture { dir, cfg }
}

impl Fixture {
    pub fn app(&self) -> App {
        App::from_config(self.cfg.clone()).unwrap()
    }

    pub fn corpus(&self) -> PathBuf {
        self.dir.path().join("data").join("corpus.jsonl")
    }
}

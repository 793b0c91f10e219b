//! Corpus ingestion and immutable index snapshots.
//!
//! A snapshot directory holds:
//! - `records.jsonl`: one [`CorpusRecord`] per line, facet embeddings included
//! - `heads.bin`: the [`FacetHeads`] that produced those embeddings
//! - `kernel.csv`: the chart-type kernel
//! - `manifest.json`: dimension, counts and the heads version hash

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelError, KernelTable};
use crate::model::{normalize, ChartType, CorpusRecord, EmbeddingVector, VectorError};
use crate::scoring::heads::{project_image, FacetHeads, HeadsError};

const MANIFEST_FORMAT: u32 = 1;

/// Records whose facet embeddings are re-projected and compared on load.
const LOAD_VERIFY_SAMPLE: usize = 16;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{id}`: dimension {actual}, index expects {expected}")]
    DimensionMismatch { id: String, expected: usize, actual: usize },
    #[error("record `{id}`: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("heads version mismatch: manifest {manifest}, heads file {heads}")]
    HeadsVersionMismatch { manifest: String, heads: String },
    #[error("record `{0}` facet embeddings do not match the stored heads")]
    StaleEmbeddings(String),
    #[error("snapshot is empty")]
    EmptySnapshot,
    #[error(transparent)]
    Heads(#[from] HeadsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("index io: {0}")]
    Io(#[from] std::io::Error),
}

/// A corpus line before facet projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestRecord {
    pub id: String,
    pub chart_types: BTreeSet<ChartType>,
    pub base_embedding: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// An ingest record that passed validation; its base embedding is unit-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StagedRecord {
    pub id: String,
    pub chart_types: BTreeSet<ChartType>,
    pub base_embedding: EmbeddingVector,
    pub metadata: BTreeMap<String, String>,
}

impl IngestRecord {
    pub fn stage(self) -> Result<StagedRecord, IndexError> {
        if self.id.trim().is_empty() {
            return Err(IndexError::InvalidRecord { id: self.id, reason: "empty id".into() });
        }
        if self.chart_types.is_empty() {
            return Err(IndexError::InvalidRecord { id: self.id, reason: "chart_types must be non-empty".into() });
        }
        let base_embedding = normalize(self.base_embedding).map_err(|e: VectorError| IndexError::InvalidRecord {
            id: self.id.clone(),
            reason: format!("base embedding: {e}"),
        })?;
        Ok(StagedRecord { id: self.id, chart_types: self.chart_types, base_embedding, metadata: self.metadata })
    }
}

impl From<StagedRecord> for IngestRecord {
    fn from(r: StagedRecord) -> Self {
        IngestRecord {
            id: r.id,
            chart_types: r.chart_types,
            base_embedding: r.base_embedding.into_inner(),
            metadata: r.metadata,
        }
    }
}

/// Reads and stages a corpus JSONL stream; blank lines are skipped.
pub fn read_corpus_jsonl(reader: impl BufRead) -> Result<Vec<StagedRecord>, IndexError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: IngestRecord =
            serde_json::from_str(&line).map_err(|e| IndexError::Parse { line: idx + 1, reason: e.to_string() })?;
        let staged = raw.stage()?;
        if !seen.insert(staged.id.clone()) {
            return Err(IndexError::DuplicateId(staged.id));
        }
        out.push(staged);
    }
    Ok(out)
}

pub fn write_corpus_jsonl(records: &[StagedRecord], writer: impl Write) -> Result<(), IndexError> {
    let mut w = BufWriter::new(writer);
    for r in records {
        serde_json::to_writer(&mut w, &IngestRecord::from(r.clone())).map_err(|e| IndexError::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub dimension: usize,
    pub hidden: usize,
    pub record_count: usize,
    pub heads_version: String,
    pub kernel_pairs: usize,
    pub created_at: DateTime<Utc>,
}

/// Immutable, searchable view of a corpus.
#[derive(Debug, Clone)]
pub struct IndexSnapshot {
    records: Vec<CorpusRecord>,
    by_id: HashMap<String, usize>,
    heads: FacetHeads,
    heads_version: String,
    kernel: KernelTable,
    created_at: DateTime<Utc>,
}

impl IndexSnapshot {
    pub fn records(&self) -> &[CorpusRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CorpusRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn dimension(&self) -> usize {
        self.heads.dim()
    }

    pub fn heads(&self) -> &FacetHeads {
        &self.heads
    }

    pub fn heads_version(&self) -> &str {
        &self.heads_version
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            format: MANIFEST_FORMAT,
            dimension: self.heads.dim(),
            hidden: self.heads.hidden(),
            record_count: self.records.len(),
            heads_version: self.heads_version.clone(),
            kernel_pairs: self.kernel.len(),
            created_at: self.created_at,
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), IndexError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join("records.jsonl"))?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(|e| IndexError::Io(e.into()))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        self.heads.save(dir.join("heads.bin"))?;
        std::fs::write(dir.join("kernel.csv"), self.kernel.to_csv())?;
        let manifest =
            serde_json::to_string_pretty(&self.manifest()).map_err(|e| IndexError::Manifest(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), manifest)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, IndexError> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)
            .map_err(|e| IndexError::Manifest(e.to_string()))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(IndexError::Manifest(format!("unsupported format {}", manifest.format)));
        }
        let heads = FacetHeads::load(dir.join("heads.bin"))?;
        let heads_version = heads.version();
        if heads_version != manifest.heads_version {
            return Err(IndexError::HeadsVersionMismatch { manifest: manifest.heads_version, heads: heads_version });
        }
        let kernel = crate::kernel::load_kernel_table(dir.join("kernel.csv"))?;

        let reader = BufReader::new(File::open(dir.join("records.jsonl"))?);
        let mut records = Vec::with_capacity(manifest.record_count);
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CorpusRecord =
                serde_json::from_str(&line).map_err(|e| IndexError::Parse { line: idx + 1, reason: e.to_string() })?;
            records.push(record);
        }
        if records.len() != manifest.record_count {
            return Err(IndexError::Manifest(format!(
                "manifest lists {} records, found {}",
                manifest.record_count,
                records.len()
            )));
        }
        for record in records.iter().take(LOAD_VERIFY_SAMPLE) {
            let projected = project_image(&record.base_embedding, &heads)?;
            if projected != record.facet_embeddings {
                return Err(IndexError::StaleEmbeddings(record.id.clone()));
            }
        }
        let mut snapshot = Self::assemble(records, heads, kernel)?;
        snapshot.created_at = manifest.created_at;
        Ok(snapshot)
    }

    fn assemble(records: Vec<CorpusRecord>, heads: FacetHeads, kernel: KernelTable) -> Result<Self, IndexError> {
        let dim = heads.dim();
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.id.clone(), i).is_some() {
                return Err(IndexError::DuplicateId(r.id.clone()));
            }
            let dims =
                std::iter::once(r.base_embedding.dim()).chain(r.facet_embeddings.values().map(EmbeddingVector::dim));
            for actual in dims {
                if actual != dim {
                    return Err(IndexError::DimensionMismatch { id: r.id.clone(), expected: dim, actual });
                }
            }
            if r.chart_types.is_empty() {
                return Err(IndexError::InvalidRecord {
                    id: r.id.clone(),
                    reason: "chart_types must be non-empty".into(),
                });
            }
        }
        Ok(IndexSnapshot { records, by_id, heads_version: heads.version(), heads, kernel, created_at: Utc::now() })
    }
}

/// Projects every record through the heads and freezes the result.
pub fn build_index(
    records: Vec<StagedRecord>,
    heads: &FacetHeads,
    kernel: KernelTable,
) -> Result<IndexSnapshot, IndexError> {
    let dim = heads.dim();
    let mut out = Vec::with_capacity(records.len());
    let mut seen = BTreeSet::new();
    for r in records {
        if !seen.insert(r.id.clone()) {
            return Err(IndexError::DuplicateId(r.id));
        }
        if r.base_embedding.dim() != dim {
            return Err(IndexError::DimensionMismatch { id: r.id, expected: dim, actual: r.base_embedding.dim() });
        }
        let facet_embeddings = project_image(&r.base_embedding, heads)?;
        out.push(CorpusRecord {
            id: r.id,
            chart_types: r.chart_types,
            base_embedding: r.base_embedding,
            facet_embeddings,
            metadata: r.metadata,
        });
    }
    IndexSnapshot::assemble(out, heads.clone(), kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FacetId;

    fn staged(id: &str, seed: u64, dim: usize) -> StagedRecord {
        let raw: Vec<f64> = (0..dim).map(|i| ((i as u64 * 31 + seed * 17) % 13) as f64 - 6.0).collect();
        IngestRecord {
            id: id.into(),
            chart_types: [ChartType::BarChart].into_iter().collect(),
            base_embedding: raw,
            metadata: BTreeMap::new(),
        }
        .stage()
        .unwrap()
    }

    #[test]
    fn empty_build_is_valid() {
        let heads = FacetHeads::init(4, 3, 0);
        let snap = build_index(vec![], &heads, KernelTable::identity()).unwrap();
        assert!(snap.is_empty());
    }

    #[test]
    fn duplicate_and_dimension_errors() {
        let heads = FacetHeads::init(4, 3, 0);
        assert!(matches!(
            build_index(vec![staged("a", 1, 4), staged("a", 2, 4)], &heads, KernelTable::identity()),
            Err(IndexError::DuplicateId(id)) if id == "a"
        ));
        assert!(matches!(
            build_index(vec![staged("a", 1, 5)], &heads, KernelTable::identity()),
            Err(IndexError::DimensionMismatch { expected: 4, actual: 5, .. })
        ));
    }

    #[test]
    fn rebuild_is_deterministic_and_tracks_heads() {
        let heads = FacetHeads::init(6, 4, 3);
        let recs = vec![staged("a", 1, 6), staged("b", 2, 6)];
        let s1 = build_index(recs.clone(), &heads, KernelTable::default_table()).unwrap();
        let s2 = build_index(recs.clone(), &heads, KernelTable::default_table()).unwrap();
        assert_eq!(s1.heads_version(), s2.heads_version());
        assert_eq!(s1.records(), s2.records());

        let mut retrained = heads.clone();
        retrained.heads[FacetId::Layout].w1[0] += 0.25;
        let s3 = build_index(recs, &retrained, KernelTable::default_table()).unwrap();
        assert_ne!(s1.heads_version(), s3.heads_version());
    }

    #[test]
    fn ingest_validation() {
        let bad = IngestRecord {
            id: "z".into(),
            chart_types: BTreeSet::new(),
            base_embedding: vec![1.0],
            metadata: BTreeMap::new(),
        };
        assert!(matches!(bad.stage(), Err(IndexError::InvalidRecord { .. })));
        let zero = IngestRecord {
            id: "z".into(),
            chart_types: [ChartType::Diagram].into_iter().collect(),
            base_embedding: vec![0.0, 0.0],
            metadata: BTreeMap::new(),
        };
        assert!(matches!(zero.stage(), Err(IndexError::InvalidRecord { .. })));

        let text = "{\"id\":\"a\",\"chart_types\":[\"pie chart\"],\"base_embedding\":[3,4]}\n\n\
                    {\"id\":\"a\",\"chart_types\":[\"Bar Chart\"],\"base_embedding\":[1,0]}\n";
        assert!(matches!(read_corpus_jsonl(text.as_bytes()), Err(IndexError::DuplicateId(_))));
        let ok =
            read_corpus_jsonl("{\"id\":\"a\",\"chart_types\":[\"pie chart\"],\"base_embedding\":[3,4]}".as_bytes())
                .unwrap();
        assert_eq!(ok[0].base_embedding.as_slice(), &[0.6, 0.8]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let heads = FacetHeads::init(8, 5, 9);
        let recs: Vec<_> = (0..20).map(|i| staged(&format!("r{i}"), i, 8)).collect();
        let snap = build_index(recs, &heads, KernelTable::default_table()).unwrap();
        snap.save(dir.path()).unwrap();
        let back = IndexSnapshot::load(dir.path()).unwrap();
        assert_eq!(back.records(), snap.records());
        assert_eq!(back.heads_version(), snap.heads_version());
        assert_eq!(back.kernel(), snap.kernel());
        assert_eq!(back.created_at(), snap.created_at());

        // Swap in different heads without rebuilding: the hash check trips.
        FacetHeads::init(8, 5, 10).save(dir.path().join("heads.bin")).unwrap();
        assert!(matches!(IndexSnapshot::load(dir.path()), Err(IndexError::HeadsVersionMismatch { .. })));
    }
}

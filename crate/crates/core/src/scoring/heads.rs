//! Per-facet projection heads: a two-layer tanh MLP per embedding facet,
//! mapping a base image embedding into that facet's space.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{dot, l2_norm, EmbeddingVector, FacetId, PerFacet, ZERO_NORM_EPS};

const MAGIC: &[u8; 8] = b"IRHEADS\0";
const FORMAT_VERSION: u32 = 1;

/// Default hidden width of each head.
pub const DEFAULT_HIDDEN: usize = 256;

#[derive(Debug, Error)]
pub enum HeadsError {
    #[error("projection collapsed to zero before normalization for facet `{0}`")]
    DegenerateProjection(FacetId),
    #[error("dimension mismatch: heads expect {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("heads file is corrupt: {0}")]
    Corrupt(String),
    #[error("non-finite parameter in head `{0}`")]
    NonFinite(FacetId),
    #[error("heads io: {0}")]
    Io(#[from] std::io::Error),
}

/// One facet head: `norm(w2 · tanh(w1 · x + b1) + b2)`.
///
/// `w1` is `hidden × dim` and `w2` is `dim × hidden`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct HeadForward {
    /// tanh activations, length `hidden`.
    pub hidden: Vec<f64>,
    /// ℓ2 norm of the output before normalization.
    pub raw_norm: f64,
    /// Normalized output.
    pub out: Vec<f64>,
}

impl MlpHead {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        MlpHead { w1: vec![0.0; hidden * dim], b1: vec![0.0; hidden], w2: vec![0.0; dim * hidden], b2: vec![0.0; dim] }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters in serialization order: w1, b1, w2, b2.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1.iter_mut().chain(self.b1.iter_mut()).chain(self.w2.iter_mut()).chain(self.b2.iter_mut())
    }

    /// Mutable access by flat index in [`MlpHead::params`] order.
    pub fn param_mut(&mut self, idx: usize) -> &mut f64 {
        let (n1, nb1, n2) = (self.w1.len(), self.b1.len(), self.w2.len());
        if idx < n1 {
            &mut self.w1[idx]
        } else if idx < n1 + nb1 {
            &mut self.b1[idx - n1]
        } else if idx < n1 + nb1 + n2 {
            &mut self.w2[idx - n1 - nb1]
        } else {
            &mut self.b2[idx - n1 - nb1 - n2]
        }
    }

    pub(crate) fn forward(&self, x: &[f64]) -> HeadForward {
        let dim = self.b2.len();
        let hidden_width = self.b1.len();
        let hidden: Vec<f64> =
            (0..hidden_width).map(|j| (dot(&self.w1[j * dim..(j + 1) * dim], x) + self.b1[j]).tanh()).collect();
        let raw: Vec<f64> =
            (0..dim).map(|i| dot(&self.w2[i * hidden_width..(i + 1) * hidden_width], &hidden) + self.b2[i]).collect();
        let raw_norm = l2_norm(&raw);
        let out = if raw_norm > 0.0 { raw.iter().map(|v| v / raw_norm).collect() } else { vec![0.0; dim] };
        HeadForward { hidden, raw_norm, out }
    }
}

/// Provenance stored alongside the parameters; not part of the version hash.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HeadsMetadata {
    pub init_seed: u64,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub train_config: Option<serde_json::Value>,
}

/// The four facet heads sharing one input/output dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetHeads {
    dim: usize,
    hidden: usize,
    pub heads: PerFacet<MlpHead>,
    pub metadata: HeadsMetadata,
}

impl FacetHeads {
    /// Uniform(±1/√fan_in) weights, zero biases.
    pub fn init(dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heads = PerFacet::from_fn(|_| {
            let mut head = MlpHead::zeros(dim, hidden);
            let bound1 = 1.0 / (dim as f64).sqrt();
            for w in head.w1.iter_mut() {
                *w = rng.random_range(-bound1..bound1);
            }
            let bound2 = 1.0 / (hidden as f64).sqrt();
            for w in head.w2.iter_mut() {
                *w = rng.random_range(-bound2..bound2);
            }
            head
        });
        FacetHeads { dim, hidden, heads, metadata: HeadsMetadata { init_seed: seed, ..HeadsMetadata::default() } }
    }

    pub fn from_heads(dim: usize, hidden: usize, heads: PerFacet<MlpHead>) -> Result<Self, HeadsError> {
        for (facet, head) in heads.iter() {
            if head.w1.len() != hidden * dim
                || head.b1.len() != hidden
                || head.w2.len() != dim * hidden
                || head.b2.len() != dim
            {
                return Err(HeadsError::Corrupt(format!("head `{facet}` has wrong shape")));
            }
            if head.params().any(|p| !p.is_finite()) {
                return Err(HeadsError::NonFinite(facet));
            }
        }
        Ok(FacetHeads { dim, hidden, heads, metadata: HeadsMetadata::default() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn param_count(&self) -> usize {
        self.heads.values().map(MlpHead::param_count).sum()
    }

    fn param_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.param_count() * 8);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.hidden as u32).to_le_bytes());
        for head in self.heads.values() {
            for p in head.params() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    /// Hex SHA-256 over shape and parameters.
    pub fn version(&self) -> String {
        hex::encode(Sha256::digest(self.param_bytes()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.metadata).expect("metadata serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&self.param_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HeadsError> {
        let corrupt = |m: &str| HeadsError::Corrupt(m.to_string());
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(8).ok_or_else(|| corrupt("truncated header"))? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = cursor.u32().ok_or_else(|| corrupt("truncated header"))?;
        if version != FORMAT_VERSION {
            return Err(HeadsError::Corrupt(format!("unsupported format version {version}")));
        }
        let meta_len = cursor.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
        let meta_bytes = cursor.take(meta_len).ok_or_else(|| corrupt("truncated metadata"))?;
        let metadata: HeadsMetadata =
            serde_json::from_slice(meta_bytes).map_err(|e| HeadsError::Corrupt(format!("metadata: {e}")))?;
        let dim = cursor.u32().ok_or_else(|| corrupt("truncated shape"))? as usize;
        let hidden = cursor.u32().ok_or_else(|| corrupt("truncated shape"))? as usize;
        let expected = 4 * (2 * dim * hidden + dim + hidden) * 8;
        if bytes.len() - cursor.pos != expected {
            return Err(HeadsError::Corrupt(format!(
                "expected {expected} parameter bytes, found {}",
                bytes.len() - cursor.pos
            )));
        }
        let mut read_vec = |n: usize| -> Vec<f64> {
            (0..n).map(|_| f64::from_le_bytes(cursor.take(8).unwrap().try_into().unwrap())).collect()
        };
        let heads = PerFacet::from_fn(|_| MlpHead {
            w1: read_vec(hidden * dim),
            b1: read_vec(hidden),
            w2: read_vec(dim * hidden),
            b2: read_vec(dim),
        });
        let mut out = FacetHeads::from_heads(dim, hidden, heads)?;
        out.metadata = metadata;
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HeadsError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HeadsError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let slice = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(slice)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Projects a base embedding through every facet head.
pub fn project_image(base: &EmbeddingVector, heads: &FacetHeads) -> Result<PerFacet<EmbeddingVector>, HeadsError> {
    if base.dim() != heads.dim() {
        return Err(HeadsError::DimensionMismatch { expected: heads.dim(), actual: base.dim() });
    }
    PerFacet::try_from_fn(|facet| {
        let fwd = heads.heads[facet].forward(base.as_slice());
        if !(fwd.raw_norm >= ZERO_NORM_EPS) {
            return Err(HeadsError::DegenerateProjection(facet));
        }
        EmbeddingVector::from_unit(fwd.out).map_err(|_| HeadsError::DegenerateProjection(facet))
    })
}

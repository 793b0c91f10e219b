//! Seeded mini-batch SGD with momentum over the facet heads.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batch_loss_and_gradient, AlignmentError, AlignmentExample};
use crate::model::{dot, FacetId, PerFacet};
use crate::scoring::heads::{project_image, FacetHeads, MlpHead, DEFAULT_HIDDEN};

/// Mixed into the seed so the shuffle stream differs from head initialization.
const SHUFFLE_STREAM: u64 = 0x5348_5546_464c_4521;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    /// 0 gives plain SGD.
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            temperature: 0.07,
            learning_rate: 1e-3,
            momentum: 0.9,
            epochs: 20,
            seed: 0,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl TrainConfig {
    fn check(&self, n: usize) -> Result<(), AlignmentError> {
        let bad = |m: String| Err(AlignmentError::InvalidConfig(m));
        if self.batch_size < 2 {
            return bad(format!("batch size must be at least 2, got {}", self.batch_size));
        }
        if n < self.batch_size {
            return bad(format!("dataset has {n} examples, fewer than batch size {}", self.batch_size));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be non-negative, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.hidden == 0 {
            return bad("hidden width must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Summed batch loss divided by the number of images that took part.
    pub mean_loss: f64,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub config: TrainConfig,
    pub initial_heads_version: String,
    pub heads_version: String,
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

/// Initializes heads from `cfg.seed` and trains them.
pub fn train_heads(
    dataset: &[AlignmentExample],
    cfg: &TrainConfig,
) -> Result<(FacetHeads, TrainingLog), AlignmentError> {
    let dim = dataset.first().map(|ex| ex.base_image_embedding.dim()).ok_or(AlignmentError::EmptyBatch)?;
    train_heads_from(dataset, FacetHeads::init(dim, cfg.hidden, cfg.seed), cfg)
}

/// Trains starting from the given heads. `cfg.hidden` must match them.
pub fn train_heads_from(
    dataset: &[AlignmentExample],
    mut heads: FacetHeads,
    cfg: &TrainConfig,
) -> Result<(FacetHeads, TrainingLog), AlignmentError> {
    cfg.check(dataset.len())?;
    if cfg.hidden != heads.hidden() {
        return Err(AlignmentError::InvalidConfig(format!(
            "config hidden width {} differs from heads ({})",
            cfg.hidden,
            heads.hidden()
        )));
    }
    let initial_heads_version = heads.version();
    let mut velocity: PerFacet<MlpHead> = PerFacet::from_fn(|_| MlpHead::zeros(heads.dim(), heads.hidden()));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        let mut batches = 0usize;
        for (batch_id, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let batch: Vec<AlignmentExample> = chunk.iter().map(|&i| dataset[i].clone()).collect();
            let (loss, grad) = batch_loss_and_gradient(&batch, &heads, cfg.temperature).map_err(|e| match e {
                AlignmentError::NonFiniteLoss { .. } => AlignmentError::NonFiniteLoss { epoch, batch: batch_id },
                other => other,
            })?;
            for facet in FacetId::EMBEDDING {
                let params = heads.heads[facet].params_mut();
                let vel = velocity[facet].params_mut();
                for ((p, v), g) in params.zip(vel).zip(grad.heads[facet].params()) {
                    *v = cfg.momentum * *v + g;
                    *p -= cfg.learning_rate * *v;
                }
            }
            loss_sum += loss;
            seen += chunk.len();
            batches += 1;
        }
        epochs.push(EpochLog { epoch, mean_loss: loss_sum / seen as f64, batches });
    }

    heads.metadata.train_config = serde_json::to_value(cfg).ok();
    heads.metadata.note = format!("trained {} epochs on {} examples", cfg.epochs, dataset.len());
    let heads_version = heads.version();
    Ok((heads, TrainingLog { config: *cfg, initial_heads_version, heads_version, epochs }))
}

/// Per-facet caption→image Recall@1 over the whole dataset: each caption
/// ranks every image by `caption · e_{x,f}`, and counts as a hit when its own
/// image scores strictly higher than all others.
pub fn caption_recall_at_1(dataset: &[AlignmentExample], heads: &FacetHeads) -> Result<PerFacet<f64>, AlignmentError> {
    if dataset.is_empty() {
        return Err(AlignmentError::EmptyBatch);
    }
    let projected = dataset
        .iter()
        .map(|ex| {
            project_image(&ex.base_image_embedding, heads).map_err(|e| AlignmentError::InvalidConfig(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut hits = PerFacet::from_fn(|_| 0usize);
    for facet in FacetId::EMBEDDING {
        for (i, ex) in dataset.iter().enumerate() {
            for caption in &ex.caption_text_embeddings[facet] {
                let c = caption.as_slice();
                let own = dot(c, projected[i][facet].as_slice());
                let beaten = projected.iter().enumerate().any(|(j, p)| j != i && dot(c, p[facet].as_slice()) >= own);
                if !beaten {
                    hits[facet] += 1;
                }
            }
        }
    }
    let total = (2 * dataset.len()) as f64;
    Ok(hits.map(|_, &h| h as f64 / total))
}

/// One [`AlignmentExample`] per non-blank line.
pub fn read_alignment_jsonl(path: impl AsRef<Path>) -> Result<Vec<AlignmentExample>, AlignmentError> {
    let file = File::open(path.as_ref())
        .map_err(|e| AlignmentError::Parse { line: 0, reason: format!("{}: {e}", path.as_ref().display()) })?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AlignmentError::Parse { line: n + 1, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: AlignmentExample =
            serde_json::from_str(&line).map_err(|e| AlignmentError::Parse { line: n + 1, reason: e.to_string() })?;
        out.push(ex);
    }
    Ok(out)
}

//! Contrastive alignment of the facet heads.
//!
//! Each training image carries two caption embeddings per embedding facet.
//! For every caption, the matching image is the positive and the other
//! images of the minibatch are negatives; the loss is the summed softmax
//! cross-entropy over all images, facets and captions, with logits
//! `caption · e_{x,f} / τ`. Only the projection heads are trained; base
//! image embeddings and caption embeddings are fixed inputs.

mod gradcheck;
mod synthetic;
mod train;

pub use gradcheck::{gradcheck, random_batch, relative_error, GradcheckConfig, GradcheckReport};
pub use synthetic::{make_synthetic_alignment_set, SyntheticConfig, SyntheticDataset};
pub use train::{
    caption_recall_at_1, read_alignment_jsonl, train_heads, train_heads_from, EpochLog, TrainConfig, TrainingLog,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{dot, EmbeddingVector, FacetId, PerFacet};
use crate::scoring::heads::{FacetHeads, MlpHead};

#[derive(Debug, Error, PartialEq)]
pub enum AlignmentError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("loss is not finite (epoch {epoch}, batch {batch})")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("gradient is not finite")]
    NonFiniteGradient,
    #[error("example `{id}`: dimension {actual}, heads expect {expected}")]
    DimensionMismatch { id: String, expected: usize, actual: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// One training image with its base embedding and two caption embeddings per
/// embedding facet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentExample {
    pub image_id: String,
    pub base_image_embedding: EmbeddingVector,
    pub caption_text_embeddings: PerFacet<[EmbeddingVector; 2]>,
}

fn check_batch(batch: &[AlignmentExample], heads: &FacetHeads) -> Result<(), AlignmentError> {
    if batch.is_empty() {
        return Err(AlignmentError::EmptyBatch);
    }
    let dim = heads.dim();
    for ex in batch {
        let dims = std::iter::once(ex.base_image_embedding.dim())
            .chain(ex.caption_text_embeddings.values().flat_map(|pair| pair.iter().map(EmbeddingVector::dim)));
        for actual in dims {
            if actual != dim {
                return Err(AlignmentError::DimensionMismatch { id: ex.image_id.clone(), expected: dim, actual });
            }
        }
    }
    Ok(())
}

/// Loss and (optionally) gradient, summing anchor terms only over `anchors`.
/// Softmax denominators always range over the whole batch.
pub(crate) fn loss_and_grad(
    batch: &[AlignmentExample],
    heads: &FacetHeads,
    tau: f64,
    anchors: &[usize],
    want_grad: bool,
) -> Result<(f64, Option<FacetHeads>), AlignmentError> {
    check_batch(batch, heads)?;
    if !(tau > 0.0) {
        return Err(AlignmentError::InvalidConfig(format!("temperature must be > 0, got {tau}")));
    }
    let dim = heads.dim();
    let hidden = heads.hidden();
    let n = batch.len();
    let mut loss = 0.0;
    let mut grads = want_grad.then(|| PerFacet::from_fn(|_| MlpHead::zeros(dim, hidden)));

    for facet in FacetId::EMBEDDING {
        let head = &heads.heads[facet];
        let forwards: Vec<_> = batch.iter().map(|ex| head.forward(ex.base_image_embedding.as_slice())).collect();
        let mut grad_e = vec![vec![0.0; dim]; if want_grad { n } else { 0 }];
        let mut logits = vec![0.0; n];

        for &i in anchors {
            for caption in &batch[i].caption_text_embeddings[facet] {
                let c = caption.as_slice();
                for (j, fwd) in forwards.iter().enumerate() {
                    logits[j] = dot(c, &fwd.out) / tau;
                }
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
                let log_sum = sum.ln();
                loss += (max - logits[i]) + log_sum;

                if want_grad {
                    for (j, g) in grad_e.iter_mut().enumerate() {
                        let p = (logits[j] - max - log_sum).exp();
                        let coeff = (p - if j == i { 1.0 } else { 0.0 }) / tau;
                        for (gk, ck) in g.iter_mut().zip(c) {
                            *gk += coeff * ck;
                        }
                    }
                }
            }
        }

        if let Some(grads) = grads.as_mut() {
            let g_head = &mut grads[facet];
            for (j, fwd) in forwards.iter().enumerate() {
                backprop_head(head, fwd, batch[j].base_image_embedding.as_slice(), &grad_e[j], g_head);
            }
        }
    }

    if !loss.is_finite() {
        return Err(AlignmentError::NonFiniteLoss { epoch: 0, batch: 0 });
    }
    let grads = match grads {
        Some(g) => {
            if g.values().any(|h| h.params().any(|p| !p.is_finite())) {
                return Err(AlignmentError::NonFiniteGradient);
            }
            let mut out = FacetHeads::from_heads(dim, hidden, g).map_err(|_| AlignmentError::NonFiniteGradient)?;
            out.metadata.note = "gradient".into();
            Some(out)
        }
        None => None,
    };
    Ok((loss, grads))
}

/// Accumulates the parameter gradient of one image's forward pass given the
/// upstream gradient with respect to the normalized output.
fn backprop_head(
    head: &MlpHead,
    fwd: &crate::scoring::heads::HeadForward,
    input: &[f64],
    grad_out: &[f64],
    acc: &mut MlpHead,
) {
    let dim = input.len();
    let hidden = fwd.hidden.len();
    // d norm(u) / du applied to grad_out: (g - e (e·g)) / |u|
    let proj = dot(&fwd.out, grad_out);
    let grad_raw: Vec<f64> = grad_out.iter().zip(&fwd.out).map(|(g, e)| (g - e * proj) / fwd.raw_norm).collect();

    let mut grad_hidden = vec![0.0; hidden];
    for i in 0..dim {
        let gu = grad_raw[i];
        acc.b2[i] += gu;
        let row = i * hidden;
        for j in 0..hidden {
            acc.w2[row + j] += gu * fwd.hidden[j];
            grad_hidden[j] += head.w2[row + j] * gu;
        }
    }
    for j in 0..hidden {
        let a = fwd.hidden[j];
        let gz = grad_hidden[j] * (1.0 - a * a);
        acc.b1[j] += gz;
        let row = j * dim;
        for k in 0..dim {
            acc.w1[row + k] += gz * input[k];
        }
    }
}

/// Summed in-batch contrastive loss over images, facets and caption variants.
pub fn batch_loss(batch: &[AlignmentExample], heads: &FacetHeads, tau: f64) -> Result<f64, AlignmentError> {
    let anchors: Vec<usize> = (0..batch.len()).collect();
    loss_and_grad(batch, heads, tau, &anchors, false).map(|(l, _)| l)
}

/// Analytic gradient of [`batch_loss`] with respect to every head parameter,
/// returned in the same shape as the heads.
pub fn batch_gradient(batch: &[AlignmentExample], heads: &FacetHeads, tau: f64) -> Result<FacetHeads, AlignmentError> {
    batch_loss_and_gradient(batch, heads, tau).map(|(_, g)| g)
}

pub fn batch_loss_and_gradient(
    batch: &[AlignmentExample],
    heads: &FacetHeads,
    tau: f64,
) -> Result<(f64, FacetHeads), AlignmentError> {
    let anchors: Vec<usize> = (0..batch.len()).collect();
    let (loss, grad) = loss_and_grad(batch, heads, tau, &anchors, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

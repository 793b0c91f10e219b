//! Central finite-difference check of the analytic head gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{batch_loss, batch_loss_and_gradient, AlignmentError, AlignmentExample};
use crate::model::{normalize, EmbeddingVector, FacetId, PerFacet};
use crate::scoring::heads::FacetHeads;

/// Denominator floor for [`relative_error`], so entries whose true gradient
/// is ~0 are judged on absolute error instead of amplified round-off.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(u) = normalize(v) {
            return u;
        }
    }
}

/// Images and captions drawn uniformly on the unit sphere.
pub fn random_batch(n: usize, dim: usize, seed: u64) -> Vec<AlignmentExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| AlignmentExample {
            image_id: format!("img{i}"),
            base_image_embedding: random_unit(&mut rng, dim),
            caption_text_embeddings: PerFacet::from_fn(|_| [random_unit(&mut rng, dim), random_unit(&mut rng, dim)]),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckConfig {
    pub batch: usize,
    pub dim: usize,
    pub hidden: usize,
    pub temperature: f64,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig { batch: 4, dim: 16, hidden: 8, temperature: 0.07, step: 1e-5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub config: GradcheckConfig,
    pub params_checked: usize,
    pub max_relative_error: f64,
    pub max_abs_error: f64,
    /// Facet and flat parameter index of the worst entry.
    pub worst: (FacetId, usize),
}

/// Compares every analytic gradient entry against a central difference of
/// the loss.
pub fn gradcheck(cfg: GradcheckConfig) -> Result<GradcheckReport, AlignmentError> {
    let batch = random_batch(cfg.batch, cfg.dim, cfg.seed);
    let heads = FacetHeads::init(cfg.dim, cfg.hidden, cfg.seed.wrapping_add(0x9e37_79b9));
    let (_, analytic) = batch_loss_and_gradient(&batch, &heads, cfg.temperature)?;

    let mut report = GradcheckReport {
        config: cfg,
        params_checked: 0,
        max_relative_error: 0.0,
        max_abs_error: 0.0,
        worst: (FacetId::Content, 0),
    };
    let mut probe = heads.clone();
    for facet in FacetId::EMBEDDING {
        let grads: Vec<f64> = analytic.heads[facet].params().copied().collect();
        for (idx, &a) in grads.iter().enumerate() {
            let original = *probe.heads[facet].param_mut(idx);
            *probe.heads[facet].param_mut(idx) = original + cfg.step;
            let plus = batch_loss(&batch, &probe, cfg.temperature)?;
            *probe.heads[facet].param_mut(idx) = original - cfg.step;
            let minus = batch_loss(&batch, &probe, cfg.temperature)?;
            *probe.heads[facet].param_mut(idx) = original;

            let numeric = (plus - minus) / (2.0 * cfg.step);
            let rel = relative_error(a, numeric);
            report.params_checked += 1;
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = (facet, idx);
            }
        }
    }
    Ok(report)
}

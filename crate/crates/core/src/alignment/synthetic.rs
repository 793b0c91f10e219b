//! Clustered synthetic alignment data.
//!
//! Every facet has its own set of cluster directions and its own random
//! assignment of images to clusters. An image's base embedding mixes the
//! directions of its four assigned clusters; each caption for facet `f` is
//! that facet's cluster direction plus independent noise. A head therefore
//! has to pull one facet's cluster signal out of the mixed base embedding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AlignmentError, AlignmentExample};
use crate::model::{dot, normalize, EmbeddingVector, FacetId, PerFacet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_images: usize,
    pub n_clusters: usize,
    pub dim: usize,
    pub seed: u64,
    /// Expected ℓ2 norm of each additive noise vector.
    pub noise: f64,
}

impl SyntheticConfig {
    pub fn new(n_images: usize, n_clusters: usize, dim: usize, seed: u64) -> Self {
        SyntheticConfig { n_images, n_clusters, dim, seed, noise: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub examples: Vec<AlignmentExample>,
    /// Cluster directions per facet.
    pub centroids: PerFacet<Vec<EmbeddingVector>>,
    /// Cluster of each image per facet.
    pub assignments: PerFacet<Vec<usize>>,
    /// Fraction of captions whose nearest centroid is their own cluster.
    pub caption_cluster_accuracy: PerFacet<f64>,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    loop {
        if let Ok(v) = normalize(gaussian(rng, dim, 1.0)) {
            return v;
        }
    }
}

fn perturbed(rng: &mut ChaCha8Rng, center: &EmbeddingVector, noise: f64) -> EmbeddingVector {
    if noise == 0.0 {
        return center.clone();
    }
    let sigma = noise / (center.dim() as f64).sqrt();
    let v: Vec<f64> = center.as_slice().iter().zip(gaussian(rng, center.dim(), sigma)).map(|(c, n)| c + n).collect();
    normalize(v).unwrap_or_else(|_| center.clone())
}

fn nearest(centroids: &[EmbeddingVector], v: &EmbeddingVector) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let s = dot(c.as_slice(), v.as_slice());
        if s > best_sim {
            best_sim = s;
            best = i;
        }
    }
    best
}

pub fn make_synthetic_alignment_set(cfg: SyntheticConfig) -> Result<SyntheticDataset, AlignmentError> {
    if cfg.n_clusters < 2 {
        return Err(AlignmentError::InvalidConfig("need at least 2 clusters".into()));
    }
    if cfg.dim == 0 || cfg.n_images == 0 {
        return Err(AlignmentError::InvalidConfig("dimension and image count must be positive".into()));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(AlignmentError::InvalidConfig("noise must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centroids: PerFacet<Vec<EmbeddingVector>> =
        PerFacet::from_fn(|_| (0..cfg.n_clusters).map(|_| unit_direction(&mut rng, cfg.dim)).collect());
    let assignments: PerFacet<Vec<usize>> =
        PerFacet::from_fn(|_| (0..cfg.n_images).map(|_| rng.random_range(0..cfg.n_clusters)).collect());

    let mut examples = Vec::with_capacity(cfg.n_images);
    let mut hits = PerFacet::from_fn(|_| 0usize);
    for i in 0..cfg.n_images {
        let mut mix = gaussian(&mut rng, cfg.dim, cfg.noise / (cfg.dim as f64).sqrt());
        for facet in FacetId::EMBEDDING {
            let c = &centroids[facet][assignments[facet][i]];
            for (m, v) in mix.iter_mut().zip(c.as_slice()) {
                *m += v;
            }
        }
        let base = normalize(mix).map_err(|e| AlignmentError::InvalidConfig(e.to_string()))?;
        let captions = PerFacet::from_fn(|facet| {
            let center = &centroids[facet][assignments[facet][i]];
            [perturbed(&mut rng, center, cfg.noise), perturbed(&mut rng, center, cfg.noise)]
        });
        for facet in FacetId::EMBEDDING {
            for cap in &captions[facet] {
                if nearest(&centroids[facet], cap) == assignments[facet][i] {
                    hits[facet] += 1;
                }
            }
        }
        examples.push(AlignmentExample {
            image_id: format!("syn{i:05}"),
            base_image_embedding: base,
            caption_text_embeddings: captions,
        });
    }
    let total = (2 * cfg.n_images) as f64;
    let caption_cluster_accuracy = hits.map(|_, &h| h as f64 / total);
    Ok(SyntheticDataset { examples, centroids, assignments, caption_cluster_accuracy })
}

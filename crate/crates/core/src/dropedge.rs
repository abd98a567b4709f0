//! Random edge removal followed by renormalization.
//!
//! A draw removes exactly `⌊V·p⌋` of the `V` undirected edges, chosen
//! uniformly without replacement. Both stored directions of a chosen edge go
//! together, so the result stays symmetric.

use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize, NormalizationScheme, SparseMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropEdgeConfig {
    /// Dropping rate; the edge-preserving "sampling percent" is `1 - p`.
    pub p: f64,
    pub layer_wise: bool,
    pub scheme: NormalizationScheme,
    pub seed: u64,
}

impl Default for DropEdgeConfig {
    fn default() -> Self {
        Self {
            p: 0.0,
            layer_wise: false,
            scheme: NormalizationScheme::AugNormAdj,
            seed: 0,
        }
    }
}

impl DropEdgeConfig {
    pub fn from_sampling_percent(sampling_percent: f64) -> Result<Self> {
        let cfg = Self {
            p: 1.0 - sampling_percent,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sampling_percent(&self) -> f64 {
        1.0 - self.p
    }

    pub fn validate(&self) -> Result<()> {
        check_rate(self.p)
    }
}

fn check_rate(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "drop rate must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

/// Number of undirected edges removed out of `v` at rate `p`.
pub fn dropped_edge_count(v: usize, p: f64) -> usize {
    // The slack absorbs representation error such as 100 * 0.29 = 28.999...
    ((v as f64 * p + 1e-9).floor() as usize).min(v)
}

/// One draw of `A - A'` where `A'` spans `⌊V·p⌋` random undirected edges.
pub fn sample<R: Rng + ?Sized>(a: &SparseMatrix, p: f64, rng: &mut R) -> Result<SparseMatrix> {
    check_rate(p)?;
    let edges = a.upper_edges();
    let k = dropped_edge_count(edges.len(), p);
    if k == 0 {
        return Ok(a.clone());
    }
    let mut removed = std::collections::HashSet::with_capacity(k);
    for idx in index::sample(rng, edges.len(), k) {
        removed.insert(edges[idx]);
    }
    Ok(a.filter(|i, j, _| !removed.contains(&(i.min(j), i.max(j)))))
}

/// `n_layers` independent draws of [`sample`].
pub fn sample_layerwise<R: Rng + ?Sized>(
    a: &SparseMatrix,
    p: f64,
    n_layers: usize,
    rng: &mut R,
) -> Result<Vec<SparseMatrix>> {
    check_rate(p)?;
    if n_layers == 0 {
        return Err(Error::Config("layer-wise sampling needs at least one layer".into()));
    }
    (0..n_layers).map(|_| sample(a, p, rng)).collect()
}

/// Per-layer propagation matrices. Outside training, or with `p = 0`, every
/// layer gets the normalized full graph. Normalization happens after
/// dropping. In one-shot mode all entries share a single draw.
pub fn propagation_matrix<R: Rng + ?Sized>(
    a: &SparseMatrix,
    cfg: &DropEdgeConfig,
    n_layers: usize,
    rng: &mut R,
    training: bool,
) -> Result<Vec<Arc<SparseMatrix>>> {
    cfg.validate()?;
    if !training || cfg.p == 0.0 {
        let full = Arc::new(normalize(a, cfg.scheme)?);
        return Ok(vec![full; n_layers]);
    }
    if cfg.layer_wise {
        sample_layerwise(a, cfg.p, n_layers, rng)?
            .iter()
            .map(|d| normalize(d, cfg.scheme).map(Arc::new))
            .collect()
    } else {
        let shared = Arc::new(normalize(&sample(a, cfg.p, rng)?, cfg.scheme)?);
        Ok(vec![shared; n_layers])
    }
}

/// Owns the random state for repeated per-epoch draws and caches the
/// full-graph propagation matrix used for evaluation.
#[derive(Debug)]
pub struct DropEdgeSampler {
    adjacency: SparseMatrix,
    cfg: DropEdgeConfig,
    rng: ChaCha8Rng,
    full: Arc<SparseMatrix>,
}

impl DropEdgeSampler {
    pub fn new(adjacency: SparseMatrix, cfg: DropEdgeConfig) -> Result<Self> {
        cfg.validate()?;
        let full = Arc::new(normalize(&adjacency, cfg.scheme)?);
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            adjacency,
            cfg,
            full,
        })
    }

    pub fn config(&self) -> &DropEdgeConfig {
        &self.cfg
    }

    /// The normalized full graph.
    pub fn full(&self) -> &Arc<SparseMatrix> {
        &self.full
    }

    pub fn eval(&self, n_layers: usize) -> Vec<Arc<SparseMatrix>> {
        vec![self.full.clone(); n_layers]
    }

    /// A fresh training-mode draw.
    pub fn train(&mut self, n_layers: usize) -> Result<Vec<Arc<SparseMatrix>>> {
        if self.cfg.p == 0.0 {
            return Ok(self.eval(n_layers));
        }
        propagation_matrix(&self.adjacency, &self.cfg, n_layers, &mut self.rng, true)
    }
}

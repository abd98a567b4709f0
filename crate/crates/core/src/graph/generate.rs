//! Random graph generators for tests, benchmarks and quick CLI runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, SparseMatrix, Splits};
use crate::dense::Matrix;
use crate::error::{Error, Result};

/// G(n, p): every unordered pair is an edge independently with probability `p`.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> SparseMatrix {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    SparseMatrix::from_undirected_edges(n, &edges).expect("generated edges are valid")
}

/// A uniformly random recursive spanning tree overlaid with G(n, p) edges, so
/// the result is always connected.
pub fn random_connected<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> SparseMatrix {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        edges.push((parent, order[k]));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    SparseMatrix::from_undirected_edges(n, &edges).expect("generated edges are valid")
}

/// Stochastic block model with class-correlated bag-of-words features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub n_nodes: usize,
    pub n_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub n_features: usize,
    /// Probability that a node carries each feature indicative of its block.
    pub feature_on: f64,
    /// Probability that a node carries each non-indicative feature.
    pub feature_noise: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            n_nodes: 200,
            n_blocks: 4,
            p_in: 0.08,
            p_out: 0.01,
            n_features: 64,
            feature_on: 0.15,
            feature_noise: 0.05,
            train_fraction: 0.5,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

pub fn sbm(cfg: &SbmConfig) -> Result<Graph> {
    if cfg.n_blocks == 0 || cfg.n_nodes < cfg.n_blocks {
        return Err(Error::Config(format!(
            "stochastic block model needs 1 <= blocks <= nodes, got {} blocks for {} nodes",
            cfg.n_blocks, cfg.n_nodes
        )));
    }
    for (name, p) in [
        ("p_in", cfg.p_in),
        ("p_out", cfg.p_out),
        ("feature_on", cfg.feature_on),
        ("feature_noise", cfg.feature_noise),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    if cfg.train_fraction < 0.0 || cfg.val_fraction < 0.0 || cfg.train_fraction + cfg.val_fraction > 1.0
    {
        return Err(Error::Config("split fractions must be nonnegative and sum to at most 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_nodes;
    let labels: Vec<usize> = (0..n).map(|i| i * cfg.n_blocks / n).collect();

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let adjacency = SparseMatrix::from_undirected_edges(n, &edges)?;

    let features = Matrix::from_fn(n, cfg.n_features, |i, j| {
        let indicative = j * cfg.n_blocks / cfg.n_features.max(1) == labels[i];
        let p = if indicative { cfg.feature_on } else { cfg.feature_noise };
        if rng.random::<f64>() < p {
            1.0
        } else {
            0.0
        }
    });

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = (cfg.train_fraction * n as f64).round() as usize;
    let n_val = ((cfg.val_fraction * n as f64).round() as usize).min(n - n_train);
    let mut splits = Splits {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();

    Graph::new(adjacency, features, labels, splits)
}

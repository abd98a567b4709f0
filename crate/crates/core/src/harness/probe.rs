use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::TrainConfig;
use super::trainer::Trainer;
use crate::backbones::Model;
use crate::dense::Matrix;
use crate::dropedge::propagation_matrix;
use crate::error::{Error, Result};
use crate::graph::{Graph, SparseMatrix};
use crate::spectral::{analyze, smoothing_probe, SmoothingProbe, DEFAULT_CLUSTER_TOL, DEFAULT_EPSILON};

#[derive(Clone, Debug, Serialize)]
pub struct ProbeConfig {
    pub train: TrainConfig,
    /// Inclusive range of layers `l` whose distance `‖H^l - H^(l-1)‖_F` is
    /// reported; `H^0` is the input.
    pub first_layer: usize,
    pub last_layer: usize,
    /// Training epochs between the two measurements.
    pub probe_epochs: usize,
    /// Seeds the edge draw used by the measuring forward pass.
    pub probe_seed: u64,
    /// Also measure distances to the top eigenspace of the full graph.
    pub spectral: bool,
}

impl ProbeConfig {
    pub fn new(train: TrainConfig) -> Self {
        let last_layer = train.model.n_layers.saturating_sub(1).max(2);
        Self {
            probe_seed: train.seed,
            train,
            first_layer: 2,
            last_layer,
            probe_epochs: 150,
            spectral: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeSnapshot {
    pub epochs_trained: usize,
    pub layers: Vec<usize>,
    pub distances: Vec<f64>,
    pub smoothing: Option<SmoothingProbe>,
}

impl ProbeSnapshot {
    /// Distance reported for layer `l`, if it is in range.
    pub fn at(&self, layer: usize) -> Option<f64> {
        self.layers.iter().position(|&l| l == layer).map(|k| self.distances[k])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub before: ProbeSnapshot,
    pub after: ProbeSnapshot,
    pub config: ProbeConfig,
}

/// `‖H^l - H^(l-1)‖_F` for `l` in `first..=last`, from an evaluation-mode
/// pass with the given propagation matrices.
pub fn layer_distances(
    model: &Model,
    props: &[Arc<SparseMatrix>],
    x: &Matrix,
    first: usize,
    last: usize,
) -> Result<Vec<f64>> {
    let hidden = model.hidden_states(props, x)?;
    if first == 0 || first > last || last > hidden.len() {
        return Err(Error::Config(format!(
            "layer range {first}..={last} outside 1..={}",
            hidden.len()
        )));
    }
    (first..=last)
        .map(|l| {
            let cur = &hidden[l - 1];
            let prev = if l == 1 { x } else { &hidden[l - 2] };
            if cur.shape() != prev.shape() {
                return Err(Error::Config(format!(
                    "layers {} and {l} have different widths ({} and {})",
                    l - 1,
                    prev.cols(),
                    cur.cols()
                )));
            }
            Ok(cur.sub(prev)?.frobenius_norm())
        })
        .collect()
}

fn snapshot(
    trainer: &Trainer,
    cfg: &ProbeConfig,
    spectral: Option<&crate::spectral::SpectralReport>,
) -> Result<ProbeSnapshot> {
    let model = trainer.model();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.probe_seed);
    let props = propagation_matrix(
        trainer.graph().adjacency(),
        &cfg.train.model.dropedge,
        model.n_gcls(),
        &mut rng,
        true,
    )?;
    let distances = layer_distances(model, &props, trainer.features(), cfg.first_layer, cfg.last_layer)?;
    let smoothing = match spectral {
        Some(report) => {
            let full = vec![trainer.full_propagation().clone(); model.n_gcls()];
            Some(smoothing_probe(model, &full, trainer.features(), report, DEFAULT_EPSILON)?)
        }
        None => None,
    };
    Ok(ProbeSnapshot {
        epochs_trained: trainer.epochs_done(),
        layers: (cfg.first_layer..=cfg.last_layer).collect(),
        distances,
        smoothing,
    })
}

/// Measures consecutive-layer distances before training and again after
/// `probe_epochs` epochs.
pub fn oversmoothing_probe(cfg: &ProbeConfig, graph: Graph) -> Result<ProbeReport> {
    cfg.train.validate()?;
    if cfg.first_layer == 0 || cfg.first_layer > cfg.last_layer {
        return Err(Error::Config(format!(
            "invalid layer range {}..={}",
            cfg.first_layer, cfg.last_layer
        )));
    }
    let mut trainer = Trainer::new(cfg.train.clone(), graph)?;
    if cfg.last_layer > trainer.model().n_gcls() {
        return Err(Error::Config(format!(
            "layer {} requested from a model with {} layers",
            cfg.last_layer,
            trainer.model().n_gcls()
        )));
    }
    let spectral = if cfg.spectral {
        let full = trainer.full_propagation();
        if !cfg.train.model.scheme.is_symmetric() {
            return Err(Error::Config(format!(
                "spectral fields need a symmetric normalization, not {}",
                cfg.train.model.scheme
            )));
        }
        Some(analyze(full, DEFAULT_CLUSTER_TOL)?)
    } else {
        None
    };
    let before = snapshot(&trainer, cfg, spectral.as_ref())?;
    for _ in 0..cfg.probe_epochs {
        trainer.step()?;
    }
    let after = snapshot(&trainer, cfg, spectral.as_ref())?;
    Ok(ProbeReport {
        before,
        after,
        config: cfg.clone(),
    })
}

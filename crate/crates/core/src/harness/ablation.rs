use rayon::prelude::*;
use serde::Serialize;

use super::config::TrainConfig;
use super::trainer::{RunReport, Trainer};
use crate::error::Result;
use crate::graph::Graph;

#[derive(Clone, Debug, Serialize)]
pub struct AblationRun {
    pub label: String,
    pub report: RunReport,
}

fn run_all(graph: &Graph, variants: Vec<(&str, TrainConfig)>) -> Result<Vec<AblationRun>> {
    variants
        .into_par_iter()
        .map(|(label, cfg)| {
            let report = Trainer::new(cfg, graph.clone())?.run()?;
            Ok(AblationRun {
                label: label.to_string(),
                report,
            })
        })
        .collect()
}

/// Runs `base` with neither regularizer, dropout only, drop-edge only, and
/// both, taking the dropout and drop rates from `base`.
pub fn ablation_dropout_vs_dropedge(base: &TrainConfig, graph: &Graph) -> Result<Vec<AblationRun>> {
    base.validate()?;
    let variant = |dropout: bool, dropedge: bool| {
        let mut cfg = base.clone();
        if !dropout {
            cfg.model.dropout = 0.0;
        }
        if !dropedge {
            cfg.model.dropedge.p = 0.0;
        }
        cfg
    };
    run_all(
        graph,
        vec![
            ("neither", variant(false, false)),
            ("dropout", variant(true, false)),
            ("dropedge", variant(false, true)),
            ("both", variant(true, true)),
        ],
    )
}

/// Runs `base` with one shared drop-edge draw per epoch and with an
/// independent draw per layer.
pub fn ablation_layerwise(base: &TrainConfig, graph: &Graph) -> Result<Vec<AblationRun>> {
    base.validate()?;
    let mut one_shot = base.clone();
    one_shot.model.dropedge.layer_wise = false;
    let mut layer_wise = base.clone();
    layer_wise.model.dropedge.layer_wise = true;
    run_all(graph, vec![("one-shot", one_shot), ("layer-wise", layer_wise)])
}

//! Training runs, over-smoothing probes and ablations.

mod ablation;
mod config;
mod probe;
mod trainer;

pub use ablation::{ablation_dropout_vs_dropedge, ablation_layerwise, AblationRun};
pub use config::{load_dataset, row_normalize, DataSource, TrainConfig};
pub use probe::{oversmoothing_probe, ProbeConfig, ProbeReport, ProbeSnapshot};
pub use trainer::{
    train, write_metrics_csv, write_summary_json, EpochRow, Evaluation, RunReport, Trainer,
    METRICS_HEADER,
};

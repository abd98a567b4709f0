use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backbones::ModelConfig;
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::generate::{sbm, SbmConfig};
use crate::graph::{load_graph, DatasetFiles, Graph};

/// Where a run gets its graph from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// A directory in the layout of [`DatasetFiles::in_dir`].
    Dir(PathBuf),
    Synthetic(SbmConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Scales every feature row to unit sum before training.
    #[serde(default = "default_true")]
    pub normalize_features: bool,
    pub data: DataSource,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            lr: 0.01,
            weight_decay: 5e-4,
            epochs: 400,
            seed: 42,
            normalize_features: true,
            data: DataSource::Synthetic(SbmConfig::default()),
            out_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        // A zero rate is accepted so that a run can leave parameters untouched.
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be nonnegative, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }
}

/// Loads or generates the graph named by `source`. Loader warnings are
/// logged.
pub fn load_dataset(source: &DataSource) -> Result<Graph> {
    match source {
        DataSource::Dir(dir) => {
            let loaded = load_graph(&DatasetFiles::in_dir(dir))?;
            if !loaded.warnings.is_empty() {
                log::info!("{} loader warnings for {}", loaded.warnings.len(), dir.display());
            }
            Ok(loaded.graph)
        }
        DataSource::Synthetic(cfg) => sbm(cfg),
    }
}

/// Divides every row by its sum; all-zero rows stay zero.
pub fn row_normalize(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let sum: f64 = row.iter().sum();
        if sum != 0.0 {
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
        cfg.epochs = 1;
        cfg.lr = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = TrainConfig {
            data: DataSource::Dir("data/cora".into()),
            ..Default::default()
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn rows_sum_to_one() {
        let x = Matrix::from_rows(&[vec![1.0, 3.0], vec![0.0, 0.0]]).unwrap();
        let y = row_normalize(&x);
        assert_eq!(y.row(0), &[0.25, 0.75]);
        assert_eq!(y.row(1), &[0.0, 0.0]);
    }
}

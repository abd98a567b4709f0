use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{load_dataset, row_normalize, TrainConfig};
use crate::autodiff::{Adam, AdamConfig, Mode, Tape};
use crate::backbones::Model;
use crate::dense::Matrix;
use crate::dropedge::DropEdgeSampler;
use crate::error::{Error, Result};
use crate::graph::{Graph, SparseMatrix};

pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc,test_acc";

/// Offsets separating the random streams derived from one run seed.
const DROPOUT_STREAM: u64 = 0x5851_f42d_4c95_7f2d;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRow {
    /// Counted from 1.
    pub epoch: usize,
    /// Loss and accuracy of the training-mode pass that produced the update.
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

/// Metrics of an evaluation-mode pass over the full graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    /// `NaN` when the test split is empty.
    pub test_loss: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub rows: Vec<EpochRow>,
    /// Epoch with the highest validation accuracy, earliest on ties.
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Test accuracy at `best_epoch`.
    pub test_acc: f64,
    pub wall_seconds: f64,
    pub config: TrainConfig,
}

impl RunReport {
    pub fn final_row(&self) -> &EpochRow {
        self.rows.last().expect("a run has at least one epoch")
    }
}

fn accuracy(logits: &Matrix, labels: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let pred = logits.argmax_rows();
    let hits = idx.iter().filter(|&&i| pred[i] == labels[i]).count();
    hits as f64 / idx.len() as f64
}

/// Full-batch trainer that redraws the drop-edge propagation matrices every
/// epoch and evaluates on the full graph.
pub struct Trainer {
    cfg: TrainConfig,
    graph: Graph,
    features: Matrix,
    model: Model,
    best_model: Option<Model>,
    sampler: DropEdgeSampler,
    adam: Adam,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, graph: Graph) -> Result<Self> {
        cfg.validate()?;
        if graph.splits().train.is_empty() || graph.splits().val.is_empty() {
            return Err(Error::Config(
                "training needs non-empty train and validation splits".into(),
            ));
        }
        let features = if cfg.normalize_features {
            row_normalize(graph.features())
        } else {
            graph.features().clone()
        };
        let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let model = Model::new(
            cfg.model.clone(),
            graph.n_features(),
            graph.n_classes(),
            &mut init_rng,
        )?;
        let sampler = DropEdgeSampler::new(graph.adjacency().clone(), cfg.model.dropedge.clone())?;
        let adam = Adam::new(
            AdamConfig {
                lr: cfg.lr,
                weight_decay: cfg.weight_decay,
                ..AdamConfig::default()
            },
            model.params(),
        );
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_STREAM),
            cfg,
            graph,
            features,
            model,
            best_model: None,
            sampler,
            adam,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Input features after optional row normalization.
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Snapshot taken at the best validation epoch so far.
    pub fn best_model(&self) -> Option<&Model> {
        self.best_model.as_ref()
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// The normalized full graph used for evaluation.
    pub fn full_propagation(&self) -> &Arc<SparseMatrix> {
        self.sampler.full()
    }

    /// One optimization step. Returns the training loss and accuracy of the
    /// stochastic pass.
    pub fn step(&mut self) -> Result<(f64, f64)> {
        let n = self.model.n_gcls();
        let props = self.sampler.train(n)?;
        let mut tape = Tape::new();
        let out = self
            .model
            .forward(&mut tape, &props, &self.features, Mode::Train, &mut self.rng)?;
        let labels = self.graph.labels();
        let train_idx = &self.graph.splits().train;
        let loss = tape.softmax_cross_entropy(out.logits, labels, train_idx)?;
        let loss_value = tape.value(loss).get(0, 0);
        self.epoch += 1;
        if !loss_value.is_finite() {
            return Err(Error::Diverged {
                epoch: self.epoch,
                loss: loss_value,
            });
        }
        let acc = accuracy(tape.value(out.logits), labels, train_idx);
        let mut grads = tape.backward(loss)?;
        let grads: Vec<Matrix> = out
            .params
            .iter()
            .zip(self.model.params())
            .map(|(&t, p)| {
                grads
                    .take(t)
                    .unwrap_or_else(|| Matrix::zeros(p.value.rows(), p.value.cols()))
            })
            .collect();
        self.adam.step(self.model.params_mut(), &grads)?;
        self.model.commit_batch_stats(&out.batch_stats)?;
        Ok((loss_value, acc))
    }

    /// Evaluation-mode pass on the full graph. Fails if any stochastic layer
    /// fired.
    pub fn evaluate(&self) -> Result<Evaluation> {
        evaluate_model(&self.model, &self.sampler, &self.graph, &self.features)
    }

    /// Runs the remaining epochs and reports the best-validation result.
    pub fn run(&mut self) -> Result<RunReport> {
        let start = Instant::now();
        let mut rows = Vec::with_capacity(self.cfg.epochs);
        let mut best: Option<(usize, f64, f64)> = None;
        while self.epoch < self.cfg.epochs {
            let (train_loss, train_acc) = self.step()?;
            let eval = self.evaluate()?;
            let epoch = self.epoch;
            log::debug!(
                "epoch {epoch}: train loss {train_loss:.4} val loss {:.4} val acc {:.4}",
                eval.val_loss,
                eval.val_acc
            );
            if best.is_none_or(|(_, v, _)| eval.val_acc > v) {
                best = Some((epoch, eval.val_acc, eval.test_acc));
                self.best_model = Some(self.model.clone());
            }
            rows.push(EpochRow {
                epoch,
                train_loss,
                train_acc,
                val_loss: eval.val_loss,
                val_acc: eval.val_acc,
                test_acc: eval.test_acc,
            });
        }
        let (best_epoch, best_val_acc, test_acc) =
            best.ok_or_else(|| Error::Config("no epochs left to run".into()))?;
        Ok(RunReport {
            rows,
            best_epoch,
            best_val_acc,
            test_acc,
            wall_seconds: start.elapsed().as_secs_f64(),
            config: self.cfg.clone(),
        })
    }
}

pub(crate) fn evaluate_model(
    model: &Model,
    sampler: &DropEdgeSampler,
    graph: &Graph,
    features: &Matrix,
) -> Result<Evaluation> {
    let props = sampler.eval(model.n_gcls());
    let mut tape = Tape::new();
    // Evaluation never draws; the generator only satisfies the signature.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = model.forward(&mut tape, &props, features, Mode::Eval, &mut rng)?;
    if tape.stochastic_ops() != 0 {
        return Err(Error::Contract(format!(
            "evaluation pass ran {} stochastic operations",
            tape.stochastic_ops()
        )));
    }
    let labels = graph.labels();
    let splits = graph.splits();
    let logits = out.logits;
    let mut loss = |idx: &[usize]| -> Result<f64> {
        if idx.is_empty() {
            return Ok(f64::NAN);
        }
        let l = tape.softmax_cross_entropy(logits, labels, idx)?;
        Ok(tape.value(l).get(0, 0))
    };
    let (train_loss, val_loss, test_loss) = (loss(&splits.train)?, loss(&splits.val)?, loss(&splits.test)?);
    let lv = tape.value(logits);
    Ok(Evaluation {
        train_loss,
        train_acc: accuracy(lv, labels, &splits.train),
        val_loss,
        val_acc: accuracy(lv, labels, &splits.val),
        test_loss,
        test_acc: accuracy(lv, labels, &splits.test),
    })
}

pub fn write_metrics_csv(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.test_acc
        )
        .unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a TrainConfig,
    epochs: usize,
    best_epoch: usize,
    best_val_acc: f64,
    test_acc: f64,
    final_val_loss: f64,
    wall_seconds: f64,
}

pub fn write_summary_json(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let summary = Summary {
        config: &report.config,
        epochs: report.rows.len(),
        best_epoch: report.best_epoch,
        best_val_acc: report.best_val_acc,
        test_acc: report.test_acc,
        final_val_loss: report.final_row().val_loss,
        wall_seconds: report.wall_seconds,
    };
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Loads the data, trains, and writes `metrics.csv` and `summary.json` when
/// the config names an output directory.
pub fn train(cfg: &TrainConfig) -> Result<RunReport> {
    cfg.validate()?;
    let graph = load_dataset(&cfg.data)?;
    let report = Trainer::new(cfg.clone(), graph)?.run()?;
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_metrics_csv(&report, dir.join("metrics.csv"))?;
        write_summary_json(&report, dir.join("summary.json"))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate::SbmConfig;
    use crate::harness::DataSource;

    fn small() -> TrainConfig {
        let mut cfg = TrainConfig {
            epochs: 5,
            data: DataSource::Synthetic(SbmConfig {
                n_nodes: 60,
                n_features: 16,
                ..Default::default()
            }),
            ..Default::default()
        };
        cfg.model.hidden_dim = 8;
        cfg
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut cfg = small();
        cfg.epochs = 1;
        cfg.lr = 0.0;
        let graph = load_dataset(&cfg.data).unwrap();
        let mut trainer = Trainer::new(cfg, graph).unwrap();
        let before = trainer.model().params().to_vec();
        let report = trainer.run().unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(trainer.model().params(), &before[..]);
    }

    #[test]
    fn seeded_runs_repeat() {
        let mut cfg = small();
        cfg.model.dropedge.p = 0.3;
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.best_epoch, b.best_epoch);
    }

    #[test]
    fn best_epoch_is_earliest_maximum() {
        let report = train(&small()).unwrap();
        let max = report.rows.iter().map(|r| r.val_acc).fold(f64::MIN, f64::max);
        let first = report.rows.iter().find(|r| r.val_acc == max).unwrap();
        assert_eq!(report.best_epoch, first.epoch);
        assert_eq!(report.test_acc, first.test_acc);
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = small();
        cfg.lr = 1e300;
        cfg.epochs = 20;
        let graph = load_dataset(&cfg.data).unwrap();
        let err = Trainer::new(cfg, graph).unwrap().run().unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }
}

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Activation, Backbone, ModelConfig};
use crate::autodiff::{glorot_init, BatchNormState, BatchStats, Mode, Param, Tape, Tensor};
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::SparseMatrix;

/// Parameter slots of one graph convolutional layer,
/// `H' = σ(BN(Â H W + H W_self + b))`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Gcl {
    pub(crate) weight: usize,
    pub(crate) self_weight: Option<usize>,
    pub(crate) bias: Option<usize>,
    /// `(gamma, beta, running state)`.
    pub(crate) bn: Option<(usize, usize, usize)>,
    /// Output layers skip batch norm and the activation.
    pub(crate) hidden: bool,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    n_features: usize,
    n_classes: usize,
    params: Vec<Param>,
    bn_states: Vec<BatchNormState>,
    gcls: Vec<Gcl>,
}

/// Handles produced by one forward pass.
#[derive(Debug)]
pub struct ForwardOutput {
    pub logits: Tensor,
    /// Output of every graph convolutional layer in evaluation order; body
    /// layers of residual models include the skip.
    pub hidden: Vec<Tensor>,
    /// Tape handles of [`Model::params`], index for index.
    pub params: Vec<Tensor>,
    /// Training-mode batch statistics per batch-norm layer.
    pub batch_stats: Vec<Option<BatchStats>>,
}

impl Model {
    pub fn new<R: Rng + ?Sized>(
        config: ModelConfig,
        n_features: usize,
        n_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if n_features == 0 || n_classes == 0 {
            return Err(Error::Config(format!(
                "model needs at least one feature and one class, got {n_features} and {n_classes}"
            )));
        }
        let mut model = Self {
            config,
            n_features,
            n_classes,
            params: Vec::new(),
            bn_states: Vec::new(),
            gcls: Vec::new(),
        };
        let h = model.config.hidden_dim;
        let n = model.config.n_layers;
        match model.config.backbone {
            Backbone::Gcn => {
                for l in 0..n {
                    let fan_in = if l == 0 { n_features } else { h };
                    if l + 1 == n {
                        model.push_gcl(fan_in, n_classes, false, rng);
                    } else {
                        model.push_gcl(fan_in, h, true, rng);
                    }
                }
            }
            Backbone::ResGcn | Backbone::JkNet => {
                model.push_gcl(n_features, h, true, rng);
                for _ in 0..n - 2 {
                    model.push_gcl(h, h, true, rng);
                }
                let fan_in = if model.config.backbone == Backbone::JkNet {
                    (n - 1) * h
                } else {
                    h
                };
                model.push_gcl(fan_in, n_classes, false, rng);
            }
            Backbone::IncepGcn => {
                model.push_gcl(n_features, h, true, rng);
                for depth in 1..=n - 2 {
                    for _ in 0..depth {
                        model.push_gcl(h, h, true, rng);
                    }
                }
                model.push_gcl((n - 2) * h, n_classes, false, rng);
            }
        }
        debug_assert_eq!(model.gcls.len(), model.config.gcl_count());
        Ok(model)
    }

    fn push_gcl<R: Rng + ?Sized>(&mut self, fan_in: usize, fan_out: usize, hidden: bool, rng: &mut R) {
        let id = self.gcls.len();
        let add = |params: &mut Vec<Param>, name: String, value: Matrix, decay: bool| {
            params.push(Param::new(name, value, decay));
            params.len() - 1
        };
        let weight = add(
            &mut self.params,
            format!("gcl{id}.weight"),
            glorot_init(fan_in, fan_out, rng),
            true,
        );
        let self_weight = self.config.withloop.then(|| {
            add(
                &mut self.params,
                format!("gcl{id}.self_weight"),
                glorot_init(fan_in, fan_out, rng),
                true,
            )
        });
        let bias = self.config.bias.then(|| {
            add(&mut self.params, format!("gcl{id}.bias"), Matrix::zeros(1, fan_out), false)
        });
        let bn = (self.config.withbn && hidden).then(|| {
            let gamma = add(
                &mut self.params,
                format!("gcl{id}.bn_gamma"),
                Matrix::filled(1, fan_out, 1.0),
                false,
            );
            let beta = add(&mut self.params, format!("gcl{id}.bn_beta"), Matrix::zeros(1, fan_out), false);
            self.bn_states.push(BatchNormState::new(fan_out));
            (gamma, beta, self.bn_states.len() - 1)
        });
        self.gcls.push(Gcl {
            weight,
            self_weight,
            bias,
            bn,
            hidden,
        });
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Number of graph convolutional layers, which is also the number of
    /// propagation matrices [`Model::forward`] expects.
    pub fn n_gcls(&self) -> usize {
        self.gcls.len()
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn bn_states(&self) -> &[BatchNormState] {
        &self.bn_states
    }

    #[cfg(test)]
    pub(crate) fn bn_states_mut(&mut self) -> &mut [BatchNormState] {
        &mut self.bn_states
    }

    /// The main weight matrix `W` of every graph convolutional layer.
    pub fn gcl_weights(&self) -> Vec<&Matrix> {
        self.gcls.iter().map(|g| &self.params[g.weight].value).collect()
    }

    pub fn n_trainable(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Folds training-mode batch statistics into the running estimates.
    pub fn commit_batch_stats(&mut self, stats: &[Option<BatchStats>]) -> Result<()> {
        if stats.len() != self.bn_states.len() {
            return Err(Error::dim("commit_batch_stats", self.bn_states.len(), stats.len()));
        }
        for (state, s) in self.bn_states.iter_mut().zip(stats) {
            if let Some(s) = s {
                state.update(s);
            }
        }
        Ok(())
    }

    /// Records a forward pass on `tape`. `props[g]` is the propagation
    /// matrix of the `g`-th graph convolutional layer.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        props: &[Arc<SparseMatrix>],
        x: &Matrix,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardOutput> {
        if props.len() != self.gcls.len() {
            return Err(Error::dim("forward propagation matrices", self.gcls.len(), props.len()));
        }
        if x.cols() != self.n_features {
            return Err(Error::dim("forward features", self.n_features, x.cols()));
        }
        let params: Vec<Tensor> = self
            .params
            .iter()
            .map(|p| tape.leaf(p.value.clone(), true))
            .collect();
        let mut pass = Pass {
            model: self,
            tape,
            props,
            params: &params,
            mode,
            stats: vec![None; self.bn_states.len()],
            hidden: Vec::with_capacity(self.gcls.len()),
            next: 0,
        };
        let input = pass.tape.constant(x.clone());
        let n = self.config.n_layers;
        let logits = match self.config.backbone {
            Backbone::Gcn => {
                let mut h = input;
                for _ in 0..n {
                    h = pass.gcl(h, rng)?;
                }
                h
            }
            Backbone::ResGcn => {
                let mut h = pass.gcl(input, rng)?;
                for _ in 0..n - 2 {
                    let out = pass.gcl_raw(h, rng)?;
                    h = pass.tape.add(out, h)?;
                    pass.hidden.push(h);
                }
                pass.gcl(h, rng)?
            }
            Backbone::JkNet => {
                let mut h = pass.gcl(input, rng)?;
                let mut taps = vec![h];
                for _ in 0..n - 2 {
                    h = pass.gcl(h, rng)?;
                    taps.push(h);
                }
                let joined = pass.tape.concat_cols(&taps)?;
                pass.gcl(joined, rng)?
            }
            Backbone::IncepGcn => {
                let stem = pass.gcl(input, rng)?;
                let mut branches = Vec::with_capacity(n - 2);
                for depth in 1..=n - 2 {
                    let mut h = stem;
                    for _ in 0..depth {
                        h = pass.gcl(h, rng)?;
                    }
                    branches.push(h);
                }
                let joined = pass.tape.concat_cols(&branches)?;
                pass.gcl(joined, rng)?
            }
        };
        debug_assert_eq!(pass.next, self.gcls.len());
        let Pass { stats, hidden, .. } = pass;
        Ok(ForwardOutput {
            logits,
            hidden,
            params,
            batch_stats: stats,
        })
    }

    /// Evaluation-mode forward pass returning the output of every graph
    /// convolutional layer.
    pub fn hidden_states(&self, props: &[Arc<SparseMatrix>], x: &Matrix) -> Result<Vec<Matrix>> {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward(&mut tape, props, x, Mode::Eval, &mut rng)?;
        Ok(out.hidden.iter().map(|&t| tape.value(t).clone()).collect())
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        n_features: usize,
        n_classes: usize,
        params: Vec<Param>,
        bn_states: Vec<BatchNormState>,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = Self::new(config, n_features, n_classes, &mut rng)?;
        if params.len() != model.params.len() {
            return Err(Error::dim("model parameters", model.params.len(), params.len()));
        }
        for (slot, p) in model.params.iter_mut().zip(params) {
            if slot.name != p.name || slot.value.shape() != p.value.shape() {
                return Err(Error::dim(
                    "model parameter",
                    format!("{} {:?}", slot.name, slot.value.shape()),
                    format!("{} {:?}", p.name, p.value.shape()),
                ));
            }
            *slot = p;
        }
        if bn_states.len() != model.bn_states.len() {
            return Err(Error::dim("batch-norm states", model.bn_states.len(), bn_states.len()));
        }
        for (slot, s) in model.bn_states.iter_mut().zip(bn_states) {
            if slot.width() != s.width() {
                return Err(Error::dim("batch-norm state width", slot.width(), s.width()));
            }
            *slot = s;
        }
        Ok(model)
    }
}

struct Pass<'a> {
    model: &'a Model,
    tape: &'a mut Tape,
    props: &'a [Arc<SparseMatrix>],
    params: &'a [Tensor],
    mode: Mode,
    stats: Vec<Option<BatchStats>>,
    hidden: Vec<Tensor>,
    next: usize,
}

impl Pass<'_> {
    /// Applies the next layer and records its output.
    fn gcl<R: Rng + ?Sized>(&mut self, h: Tensor, rng: &mut R) -> Result<Tensor> {
        let out = self.gcl_raw(h, rng)?;
        self.hidden.push(out);
        Ok(out)
    }

    /// Applies the next layer without recording it.
    fn gcl_raw<R: Rng + ?Sized>(&mut self, h: Tensor, rng: &mut R) -> Result<Tensor> {
        let idx = self.next;
        self.next += 1;
        let layer = &self.model.gcls[idx];
        let cfg = &self.model.config;
        let tape = &mut *self.tape;

        let h = tape.dropout(h, cfg.dropout, rng, self.mode)?;
        let hw = tape.matmul(h, self.params[layer.weight])?;
        let mut z = tape.spmm(self.props[idx].clone(), hw)?;
        if let Some(sw) = layer.self_weight {
            let own = tape.matmul(h, self.params[sw])?;
            z = tape.add(z, own)?;
        }
        if let Some(b) = layer.bias {
            z = tape.add_bias(z, self.params[b])?;
        }
        if let Some((gamma, beta, state)) = layer.bn {
            let (out, stats) = tape.batch_norm(
                z,
                self.params[gamma],
                self.params[beta],
                &self.model.bn_states[state],
                self.mode,
            )?;
            self.stats[state] = stats;
            z = out;
        }
        if layer.hidden && cfg.activation == Activation::Relu {
            z = tape.relu(z);
        }
        Ok(z)
    }
}

use std::sync::Arc;

use rand::Rng;

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::SparseMatrix;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Tensor(usize);

impl Tensor {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether stochastic layers are active and batch statistics are used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    pub fn is_training(self) -> bool {
        self == Mode::Train
    }
}

/// Running statistics of a batch-normalization layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNormState {
    pub const MOMENTUM: f64 = 0.9;
    pub const EPS: f64 = 1e-5;

    pub fn new(width: usize) -> Self {
        Self {
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.running_mean.len()
    }

    /// Folds one batch into the running averages.
    pub fn update(&mut self, batch: &BatchStats) {
        let m = Self::MOMENTUM;
        for (r, b) in self.running_mean.iter_mut().zip(&batch.mean) {
            *r = m * *r + (1.0 - m) * b;
        }
        for (r, b) in self.running_var.iter_mut().zip(&batch.unbiased_var) {
            *r = m * *r + (1.0 - m) * b;
        }
    }
}

/// Per-feature statistics of one training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub unbiased_var: Vec<f64>,
}

enum Op {
    Leaf,
    MatMul(Tensor, Tensor),
    SpMM(Arc<SparseMatrix>, Tensor),
    Relu(Tensor),
    Dropout {
        input: Tensor,
        mask: Vec<f64>,
    },
    AddBias(Tensor, Tensor),
    Add(Tensor, Tensor),
    Concat(Vec<Tensor>),
    BatchNorm {
        input: Tensor,
        gamma: Tensor,
        beta: Tensor,
        normalized: Matrix,
        inv_std: Vec<f64>,
        batch_statistics: bool,
    },
    SoftmaxCrossEntropy {
        logits: Tensor,
        probs: Matrix,
        labels: Vec<usize>,
        mask: Vec<usize>,
    },
    Sum(Tensor),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Records dense operations for one forward pass; [`Tape::backward`]
/// consumes it.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    stochastic_ops: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Tensor {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Tensor(self.nodes.len() - 1)
    }

    fn needs(&self, t: Tensor) -> bool {
        self.nodes[t.0].requires_grad
    }

    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Tensor {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Matrix) -> Tensor {
        self.leaf(value, false)
    }

    pub fn value(&self, t: Tensor) -> &Matrix {
        &self.nodes[t.0].value
    }

    pub fn shape(&self, t: Tensor) -> (usize, usize) {
        self.nodes[t.0].value.shape()
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.needs(t)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Count of dropout masks drawn with a positive rate in training mode.
    pub fn stochastic_ops(&self) -> usize {
        self.stochastic_ops
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn spmm(&mut self, adj: Arc<SparseMatrix>, h: Tensor) -> Result<Tensor> {
        let value = adj.spmm(self.value(h))?;
        let rg = self.needs(h);
        Ok(self.push(value, Op::SpMM(adj, h), rg))
    }

    pub fn relu(&mut self, x: Tensor) -> Tensor {
        let value = self.value(x).map(|v| v.max(0.0));
        let rg = self.needs(x);
        self.push(value, Op::Relu(x), rg)
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 - rate)`. Returns
    /// `x` itself when not training or when `rate` is zero.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Tensor,
        rate: f64,
        rng: &mut R,
        mode: Mode,
    ) -> Result<Tensor> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Domain(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        if !mode.is_training() || rate == 0.0 {
            return Ok(x);
        }
        self.stochastic_ops += 1;
        let keep = 1.0 / (1.0 - rate);
        // An entry is dropped when a uniform 32-bit draw falls below
        // `rate * 2^32`.
        let threshold = (rate * 4_294_967_296.0) as u64;
        let mut draw = || {
            if u64::from(rng.next_u32()) < threshold {
                0.0
            } else {
                keep
            }
        };
        let rg = self.needs(x);
        let src = self.value(x);
        if !rg {
            // No gradient flows back, so only entries that can change the
            // output need a draw and no mask is kept.
            let data = src
                .as_slice()
                .iter()
                .map(|&v| if v == 0.0 { 0.0 } else { v * draw() })
                .collect();
            let value = Matrix::from_vec(src.rows(), src.cols(), data)?;
            return Ok(self.push(value, Op::Dropout { input: x, mask: Vec::new() }, false));
        }
        let mask: Vec<f64> = (0..src.len()).map(|_| draw()).collect();
        let data = src
            .as_slice()
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        let value = Matrix::from_vec(src.rows(), src.cols(), data)?;
        Ok(self.push(value, Op::Dropout { input: x, mask }, rg))
    }

    /// Adds a `1 x C` row vector to every row of `x`.
    pub fn add_bias(&mut self, x: Tensor, bias: Tensor) -> Result<Tensor> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::dim(
                "add_bias",
                format!("1x{}", xv.cols()),
                format!("{}x{}", bv.rows(), bv.cols()),
            ));
        }
        let mut value = xv.clone();
        for i in 0..value.rows() {
            for (o, b) in value.row_mut(i).iter_mut().zip(bv.row(0)) {
                *o += b;
            }
        }
        let rg = self.needs(x) || self.needs(bias);
        Ok(self.push(value, Op::AddBias(x, bias), rg))
    }

    pub fn add(&mut self, x: Tensor, y: Tensor) -> Result<Tensor> {
        let value = self.value(x).add(self.value(y))?;
        let rg = self.needs(x) || self.needs(y);
        Ok(self.push(value, Op::Add(x, y), rg))
    }

    /// Stacks along the feature dimension.
    pub fn concat_cols(&mut self, xs: &[Tensor]) -> Result<Tensor> {
        let Some(&first) = xs.first() else {
            return Err(Error::Domain("concat_cols needs at least one input".into()));
        };
        let rows = self.value(first).rows();
        let mut width = 0;
        for &x in xs {
            let (r, c) = self.shape(x);
            if r != rows {
                return Err(Error::dim("concat_cols", format!("{rows} rows"), r));
            }
            width += c;
        }
        let mut value = Matrix::zeros(rows, width);
        for i in 0..rows {
            let mut off = 0;
            let out = value.row_mut(i);
            for &x in xs {
                let src = self.nodes[x.0].value.row(i);
                out[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let rg = xs.iter().any(|&x| self.needs(x));
        Ok(self.push(value, Op::Concat(xs.to_vec()), rg))
    }

    /// Batch normalization over the node dimension followed by a per-feature
    /// affine map. In training the batch statistics are used and returned so
    /// the caller can fold them into `state`; otherwise the running
    /// statistics are used.
    pub fn batch_norm(
        &mut self,
        x: Tensor,
        gamma: Tensor,
        beta: Tensor,
        state: &BatchNormState,
        mode: Mode,
    ) -> Result<(Tensor, Option<BatchStats>)> {
        let xv = self.value(x);
        let (n, c) = xv.shape();
        if state.width() != c {
            return Err(Error::dim("batch_norm", format!("{} features", state.width()), c));
        }
        for (name, t) in [("gamma", gamma), ("beta", beta)] {
            let (r, cc) = self.shape(t);
            if r != 1 || cc != c {
                return Err(Error::dim(
                    if name == "gamma" { "batch_norm gamma" } else { "batch_norm beta" },
                    format!("1x{c}"),
                    format!("{r}x{cc}"),
                ));
            }
        }

        let (mean, var, stats) = if mode.is_training() {
            if n == 0 {
                return Err(Error::Domain("batch_norm on an empty batch".into()));
            }
            let mut mean = vec![0.0; c];
            for i in 0..n {
                for (m, v) in mean.iter_mut().zip(xv.row(i)) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            let mut sq = vec![0.0; c];
            for i in 0..n {
                for ((s, v), m) in sq.iter_mut().zip(xv.row(i)).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            let var: Vec<f64> = sq.iter().map(|s| s / n as f64).collect();
            let unbiased_var = if n > 1 {
                sq.iter().map(|s| s / (n - 1) as f64).collect()
            } else {
                var.clone()
            };
            let stats = BatchStats {
                mean: mean.clone(),
                unbiased_var,
            };
            (mean, var, Some(stats))
        } else {
            (state.running_mean.clone(), state.running_var.clone(), None)
        };

        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v + BatchNormState::EPS).sqrt())
            .collect();
        let mut normalized = Matrix::zeros(n, c);
        for i in 0..n {
            let src = xv.row(i);
            for (j, out) in normalized.row_mut(i).iter_mut().enumerate() {
                *out = (src[j] - mean[j]) * inv_std[j];
            }
        }
        let (g, b) = (self.value(gamma).row(0), self.value(beta).row(0));
        let mut value = normalized.clone();
        for i in 0..n {
            for (j, out) in value.row_mut(i).iter_mut().enumerate() {
                *out = *out * g[j] + b[j];
            }
        }
        let rg = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let t = self.push(
            value,
            Op::BatchNorm {
                input: x,
                gamma,
                beta,
                normalized,
                inv_std,
                batch_statistics: mode.is_training(),
            },
            rg,
        );
        Ok((t, stats))
    }

    /// Mean negative log-likelihood of `labels` under a row softmax of
    /// `logits`, restricted to the rows in `mask`.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Tensor,
        labels: &[usize],
        mask: &[usize],
    ) -> Result<Tensor> {
        if mask.is_empty() {
            return Err(Error::Domain("cross-entropy over an empty node set".into()));
        }
        let lv = self.value(logits);
        let (n, k) = lv.shape();
        if labels.len() != n {
            return Err(Error::dim("softmax_cross_entropy labels", n, labels.len()));
        }
        let mut probs = Matrix::zeros(mask.len(), k);
        let mut total = 0.0;
        for (r, &i) in mask.iter().enumerate() {
            if i >= n {
                return Err(Error::Domain(format!("mask row {i} out of range for {n} rows")));
            }
            let label = labels[i];
            if label >= k {
                return Err(Error::Domain(format!("label {label} out of range for {k} classes")));
            }
            let row = lv.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_z = max + sum_exp.ln();
            total += log_z - row[label];
            for (p, v) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (v - log_z).exp();
            }
        }
        let value = Matrix::filled(1, 1, total / mask.len() as f64);
        let rg = self.needs(logits);
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels: labels.to_vec(),
                mask: mask.to_vec(),
            },
            rg,
        ))
    }

    pub fn sum(&mut self, x: Tensor) -> Tensor {
        let value = Matrix::filled(1, 1, self.value(x).sum());
        let rg = self.needs(x);
        self.push(value, Op::Sum(x), rg)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(self, loss: Tensor) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let Tape { nodes, .. } = self;
        let requires: Vec<bool> = nodes.iter().map(|n| n.requires_grad).collect();
        let mut grads: Vec<Option<Matrix>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        let accumulate = |grads: &mut Vec<Option<Matrix>>, t: Tensor, g: Matrix| {
            if !requires[t.0] {
                return;
            }
            match &mut grads[t.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        };

        for id in (0..=loss.0).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            // Leaves keep their gradient; intermediates are released.
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if requires[a.0] {
                        accumulate(&mut grads, *a, g.matmul_nt(&nodes[b.0].value)?);
                    }
                    if requires[b.0] {
                        accumulate(&mut grads, *b, nodes[a.0].value.matmul_tn(&g)?);
                    }
                }
                Op::SpMM(adj, h) => {
                    // Propagation matrices here are symmetric, but the
                    // transpose keeps this correct for AugRWalk too.
                    let gt = if adj.is_symmetric(0.0) {
                        adj.spmm(&g)?
                    } else {
                        adj.transpose().spmm(&g)?
                    };
                    accumulate(&mut grads, *h, gt);
                }
                Op::Relu(x) => {
                    let out = g.zip_map(&node.value, |gv, y| if y > 0.0 { gv } else { 0.0 });
                    accumulate(&mut grads, *x, out);
                }
                Op::Dropout { input, mask } => {
                    let data = g.as_slice().iter().zip(mask).map(|(a, b)| a * b).collect();
                    accumulate(&mut grads, *input, Matrix::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::AddBias(x, bias) => {
                    if requires[bias.0] {
                        let mut db = Matrix::zeros(1, g.cols());
                        for i in 0..g.rows() {
                            for (d, v) in db.row_mut(0).iter_mut().zip(g.row(i)) {
                                *d += v;
                            }
                        }
                        accumulate(&mut grads, *bias, db);
                    }
                    accumulate(&mut grads, *x, g);
                }
                Op::Add(x, y) => {
                    accumulate(&mut grads, *y, g.clone());
                    accumulate(&mut grads, *x, g);
                }
                Op::Concat(xs) => {
                    let mut off = 0;
                    for x in xs {
                        let w = nodes[x.0].value.cols();
                        if requires[x.0] {
                            accumulate(&mut grads, *x, g.column_block(off, w));
                        }
                        off += w;
                    }
                }
                Op::BatchNorm {
                    input,
                    gamma,
                    beta,
                    normalized,
                    inv_std,
                    batch_statistics,
                } => {
                    let (n, c) = g.shape();
                    if requires[gamma.0] || requires[beta.0] {
                        let mut dg = Matrix::zeros(1, c);
                        let mut db = Matrix::zeros(1, c);
                        for i in 0..n {
                            for j in 0..c {
                                let gv = g.get(i, j);
                                dg.as_mut_slice()[j] += gv * normalized.get(i, j);
                                db.as_mut_slice()[j] += gv;
                            }
                        }
                        accumulate(&mut grads, *gamma, dg);
                        accumulate(&mut grads, *beta, db);
                    }
                    if requires[input.0] {
                        let gam = nodes[gamma.0].value.row(0);
                        let mut dx = Matrix::zeros(n, c);
                        if *batch_statistics {
                            let nf = n as f64;
                            for j in 0..c {
                                let mut sum_d = 0.0;
                                let mut sum_dx = 0.0;
                                for i in 0..n {
                                    let d = g.get(i, j) * gam[j];
                                    sum_d += d;
                                    sum_dx += d * normalized.get(i, j);
                                }
                                for i in 0..n {
                                    let d = g.get(i, j) * gam[j];
                                    let v = inv_std[j] / nf
                                        * (nf * d - sum_d - normalized.get(i, j) * sum_dx);
                                    dx.set(i, j, v);
                                }
                            }
                        } else {
                            for i in 0..n {
                                for j in 0..c {
                                    dx.set(i, j, g.get(i, j) * gam[j] * inv_std[j]);
                                }
                            }
                        }
                        accumulate(&mut grads, *input, dx);
                    }
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    probs,
                    labels,
                    mask,
                } => {
                    let scale = g.get(0, 0) / mask.len() as f64;
                    let (n, k) = nodes[logits.0].value.shape();
                    let mut dl = Matrix::zeros(n, k);
                    for (r, &i) in mask.iter().enumerate() {
                        let out = dl.row_mut(i);
                        for (o, p) in out.iter_mut().zip(probs.row(r)) {
                            *o += p * scale;
                        }
                        out[labels[i]] -= scale;
                    }
                    accumulate(&mut grads, *logits, dl);
                }
                Op::Sum(x) => {
                    let (r, c) = nodes[x.0].value.shape();
                    accumulate(&mut grads, *x, Matrix::filled(r, c, g.get(0, 0)));
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Gradients of leaf tensors after a backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// `None` when `t` does not require a gradient or the loss does not
    /// depend on it.
    pub fn get(&self, t: Tensor) -> Option<&Matrix> {
        self.grads.get(t.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, t: Tensor) -> Option<Matrix> {
        self.grads.get_mut(t.0).and_then(Option::take)
    }
}

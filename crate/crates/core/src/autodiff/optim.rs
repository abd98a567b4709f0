use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::Matrix;
use crate::error::{Error, Result};

/// A trainable matrix. `decay` marks whether L2 weight decay applies.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub decay: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Matrix, decay: bool) -> Self {
        Self {
            name: name.into(),
            value,
            decay,
        }
    }
}

/// Uniform in `±sqrt(6 / (rows + cols))`.
pub fn glorot_init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Bias-corrected Adam with weight decay added to the gradient as an L2 term.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &[Param]) -> Self {
        let zeros = |p: &Param| Matrix::zeros(p.value.rows(), p.value.cols());
        Self {
            cfg,
            step: 0,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [Param], grads: &[Matrix]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::dim(
                "Adam::step",
                format!("{} parameters and gradients", self.first.len()),
                format!("{} parameters, {} gradients", params.len(), grads.len()),
            ));
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((param, grad), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            if grad.shape() != param.value.shape() {
                return Err(Error::dim(
                    "Adam::step gradient",
                    format!("{:?}", param.value.shape()),
                    format!("{:?}", grad.shape()),
                ));
            }
            let decay = if param.decay { weight_decay } else { 0.0 };
            let w = param.value.as_mut_slice();
            let (ms, vs) = (m.as_mut_slice(), v.as_mut_slice());
            for (k, &g0) in grad.as_slice().iter().enumerate() {
                let g = g0 + decay * w[k];
                ms[k] = beta1 * ms[k] + (1.0 - beta1) * g;
                vs[k] = beta2 * vs[k] + (1.0 - beta2) * g * g;
                let m_hat = ms[k] / c1;
                let v_hat = vs[k] / c2;
                w[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_step_moves_each_weight_by_lr() {
        let mut params = vec![Param::new("w", Matrix::zeros(1, 3), true)];
        let mut adam = Adam::new(
            AdamConfig {
                lr: 0.01,
                ..Default::default()
            },
            &params,
        );
        let grad = Matrix::from_rows(&[vec![1e-3, -5.0, 200.0]]).unwrap();
        adam.step(&mut params, &[grad]).unwrap();
        let w = params[0].value.as_slice();
        assert!((w[0] + 0.01).abs() < 1e-7);
        assert!((w[1] - 0.01).abs() < 1e-9);
        assert!((w[2] + 0.01).abs() < 1e-9);
    }

    #[test]
    fn decay_only_touches_flagged_params() {
        let mut params = vec![
            Param::new("w", Matrix::filled(1, 1, 1.0), true),
            Param::new("b", Matrix::filled(1, 1, 1.0), false),
        ];
        let mut adam = Adam::new(
            AdamConfig {
                lr: 0.1,
                weight_decay: 1.0,
                ..Default::default()
            },
            &params,
        );
        adam.step(&mut params, &[Matrix::zeros(1, 1), Matrix::zeros(1, 1)])
            .unwrap();
        assert!(params[0].value.get(0, 0) < 1.0);
        assert_eq!(params[1].value.get(0, 0), 1.0);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut params = vec![Param::new("w", Matrix::filled(2, 2, 0.5), true)];
        let before = params.clone();
        let mut adam = Adam::new(
            AdamConfig {
                lr: 0.0,
                weight_decay: 5e-4,
                ..Default::default()
            },
            &params,
        );
        adam.step(&mut params, &[Matrix::filled(2, 2, 3.0)]).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn glorot_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = glorot_init(30, 20, &mut rng);
        let bound = (6.0f64 / 50.0).sqrt();
        assert!(w.as_slice().iter().all(|v| v.abs() <= bound));
        assert!(w.as_slice().iter().any(|v| v.abs() > bound * 0.9));
    }
}

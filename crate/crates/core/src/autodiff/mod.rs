//! Reverse-mode differentiation over dense 2-D values, with the optimizer
//! and initializer used to train the backbones.

mod optim;
mod tape;

pub use optim::{glorot_init, Adam, AdamConfig, Param};
pub use tape::{BatchNormState, BatchStats, Gradients, Mode, Tape, Tensor};

//! Graph convolutional backbones built on the autodiff tape.

mod checkpoint;
mod config;
mod model;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{Activation, Backbone, ModelConfig};
pub use model::{ForwardOutput, Model};

//! Graph convolutional networks trained with random edge removal, together
//! with the spectral tools used to study over-smoothing.

pub mod autodiff;
pub mod backbones;
pub mod dense;
pub mod dropedge;
pub mod error;
pub mod graph;
pub mod harness;
pub mod spectral;

pub use backbones::{Activation, Backbone, Model, ModelConfig};
pub use dense::Matrix;
pub use dropedge::{DropEdgeConfig, DropEdgeSampler};
pub use error::{Error, Result};
pub use graph::{Graph, NormalizationScheme, SparseMatrix, Splits};

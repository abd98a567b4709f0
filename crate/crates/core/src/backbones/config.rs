use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dropedge::DropEdgeConfig;
use crate::error::{Error, Result};
use crate::graph::NormalizationScheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    /// A plain chain of graph convolutional layers.
    Gcn,
    /// Identity skips around every body layer.
    ResGcn,
    /// Every layer below the output feeds the output layer directly.
    JkNet,
    /// Parallel branches of increasing depth over a shared input layer.
    IncepGcn,
}

impl Backbone {
    pub fn min_layers(self) -> usize {
        match self {
            Backbone::Gcn => 2,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Backbone::Gcn => "gcn",
            Backbone::ResGcn => "resgcn",
            Backbone::JkNet => "jknet",
            Backbone::IncepGcn => "incepgcn",
        }
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Backbone::Gcn),
            "resgcn" => Ok(Backbone::ResGcn),
            "jknet" => Ok(Backbone::JkNet),
            "incepgcn" | "inceptgcn" => Ok(Backbone::IncepGcn),
            _ => Err(Error::Config(format!(
                "unknown backbone `{s}` (expected gcn, resgcn, jknet or incepgcn)"
            ))),
        }
    }
}

/// Nonlinearity of the hidden layers. `Identity` exists to study the linear
/// propagation dynamics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: Backbone,
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    /// Adds a self-feature term `H W_self` to every layer.
    pub withloop: bool,
    pub withbn: bool,
    pub bias: bool,
    #[serde(default)]
    pub activation: Activation,
    pub scheme: NormalizationScheme,
    pub dropedge: DropEdgeConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backbone: Backbone::Gcn,
            n_layers: 2,
            hidden_dim: 128,
            dropout: 0.5,
            withloop: false,
            withbn: false,
            bias: true,
            activation: Activation::Relu,
            scheme: NormalizationScheme::AugNormAdj,
            dropedge: DropEdgeConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers < self.backbone.min_layers() {
            return Err(Error::Config(format!(
                "{} needs at least {} layers, got {}",
                self.backbone,
                self.backbone.min_layers(),
                self.n_layers
            )));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden dimension must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.dropedge.scheme != self.scheme {
            return Err(Error::Config(format!(
                "normalization {} disagrees with the drop-edge normalization {}",
                self.scheme, self.dropedge.scheme
            )));
        }
        self.dropedge.validate()
    }

    /// Sets the normalization for both propagation and drop-edge renormalization.
    pub fn with_scheme(mut self, scheme: NormalizationScheme) -> Self {
        self.scheme = scheme;
        self.dropedge.scheme = scheme;
        self
    }

    /// Number of graph convolutional layers the backbone instantiates.
    pub fn gcl_count(&self) -> usize {
        match self.backbone {
            Backbone::IncepGcn => {
                let branches = self.n_layers - 2;
                2 + branches * (branches + 1) / 2
            }
            _ => self.n_layers,
        }
    }
}

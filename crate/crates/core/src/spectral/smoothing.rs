use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use super::eigen::{subspace_distance, SpectralReport};
use crate::backbones::Model;
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::SparseMatrix;

pub const DEFAULT_EPSILON: f64 = 1e-3;

/// A layer count that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LayerBound {
    Finite(usize),
    Unbounded,
}

impl LayerBound {
    pub fn finite(self) -> Option<usize> {
        match self {
            LayerBound::Finite(l) => Some(l),
            LayerBound::Unbounded => None,
        }
    }
}

impl fmt::Display for LayerBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerBound::Finite(l) => write!(f, "{l}"),
            LayerBound::Unbounded => f.write_str("infinity"),
        }
    }
}

impl Serialize for LayerBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LayerBound::Finite(l) => s.serialize_u64(*l as u64),
            LayerBound::Unbounded => s.serialize_str("infinity"),
        }
    }
}

/// Smallest `l` with `d0 (sλ)^l` below `epsilon`, in closed form.
pub fn relaxed_smoothing_layer(epsilon: f64, d0: f64, s: f64, lambda: f64) -> Result<LayerBound> {
    if !(epsilon > 0.0) || !(d0 > 0.0) {
        return Err(Error::Domain(format!(
            "epsilon and d0 must be positive, got {epsilon} and {d0}"
        )));
    }
    if !(s >= 0.0) || !(lambda >= 0.0) {
        return Err(Error::Domain(format!(
            "s and lambda must be nonnegative, got {s} and {lambda}"
        )));
    }
    if epsilon >= d0 {
        return Ok(LayerBound::Finite(0));
    }
    let rate = s * lambda;
    if rate >= 1.0 {
        return Ok(LayerBound::Unbounded);
    }
    if rate == 0.0 {
        return Ok(LayerBound::Finite(1));
    }
    let layers = ((epsilon / d0).ln() / rate.ln()).ceil();
    Ok(LayerBound::Finite(layers as usize))
}

/// First layer (counting from 1) whose output lies within `epsilon` of the
/// subspace spanned by `basis`.
pub fn empirical_smoothing_layer(
    hidden: &[Matrix],
    basis: &Matrix,
    epsilon: f64,
) -> Result<Option<usize>> {
    for (l, h) in hidden.iter().enumerate() {
        if subspace_distance(h, basis)? < epsilon {
            return Ok(Some(l + 1));
        }
    }
    Ok(None)
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.to_nalgebra()
        .singular_values()
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

/// Supremum over the layer weights of their largest singular value.
pub fn sup_singular_value(model: &Model) -> f64 {
    model
        .gcl_weights()
        .into_iter()
        .map(spectral_norm)
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingProbe {
    pub epsilon: f64,
    /// `d_M` of the input features.
    pub d0: f64,
    /// `d_M` of every layer output, starting at layer 1.
    pub distances: Vec<f64>,
    pub l_hat: LayerBound,
    pub l_star_empirical: Option<usize>,
    pub s: f64,
    pub lambda: f64,
}

/// Evaluation-mode forward pass of `model` measured against the top
/// eigenspace in `report`.
pub fn smoothing_probe(
    model: &Model,
    props: &[Arc<SparseMatrix>],
    x: &Matrix,
    report: &SpectralReport,
    epsilon: f64,
) -> Result<SmoothingProbe> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let hidden = model.hidden_states(props, x)?;
    let d0 = subspace_distance(x, &report.basis)?;
    let distances = hidden
        .iter()
        .map(|h| subspace_distance(h, &report.basis))
        .collect::<Result<Vec<_>>>()?;
    let s = sup_singular_value(model);
    let lambda = report.lambda();
    let l_hat = if d0 == 0.0 {
        LayerBound::Finite(0)
    } else {
        relaxed_smoothing_layer(epsilon, d0, s, lambda)?
    };
    let l_star_empirical = distances.iter().position(|&d| d < epsilon).map(|l| l + 1);
    Ok(SmoothingProbe {
        epsilon,
        d0,
        distances,
        l_hat,
        l_star_empirical,
        s,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_example() {
        assert_eq!(
            relaxed_smoothing_layer(0.01, 1.0, 1.0, 0.5).unwrap(),
            LayerBound::Finite(7)
        );
    }

    #[test]
    fn edge_cases() {
        assert_eq!(relaxed_smoothing_layer(2.0, 1.0, 1.0, 0.5).unwrap(), LayerBound::Finite(0));
        assert_eq!(relaxed_smoothing_layer(0.1, 1.0, 1.0, 1.0).unwrap(), LayerBound::Unbounded);
        assert_eq!(relaxed_smoothing_layer(0.1, 1.0, 0.0, 0.5).unwrap(), LayerBound::Finite(1));
        assert!(relaxed_smoothing_layer(0.0, 1.0, 1.0, 0.5).is_err());
        assert!(relaxed_smoothing_layer(0.1, -1.0, 1.0, 0.5).is_err());
        assert!(LayerBound::Finite(1_000_000) < LayerBound::Unbounded);
    }

    #[test]
    fn spectral_norm_of_simple_matrices() {
        assert!((spectral_norm(&Matrix::identity(4)) - 1.0).abs() < 1e-12);
        assert!((spectral_norm(&Matrix::diag(&[3.0, 1.0])) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bound_serializes_as_number_or_string() {
        assert_eq!(serde_json::to_string(&LayerBound::Finite(3)).unwrap(), "3");
        assert_eq!(serde_json::to_string(&LayerBound::Unbounded).unwrap(), "\"infinity\"");
    }
}

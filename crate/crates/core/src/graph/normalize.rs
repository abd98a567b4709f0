use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SparseMatrix;
use crate::error::{Error, Result};

/// Propagation matrix built from an adjacency `A` with degree matrix `D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum NormalizationScheme {
    /// `I + D^{-1/2} A D^{-1/2}`
    FirstOrderGCN,
    /// `(D + I)^{-1/2} (A + I) (D + I)^{-1/2}`
    #[default]
    AugNormAdj,
    /// `I + (D + I)^{-1/2} (A + I) (D + I)^{-1/2}`
    BingGeNormAdj,
    /// `(D + I)^{-1} (A + I)`
    AugRWalk,
}

impl NormalizationScheme {
    pub const ALL: [NormalizationScheme; 4] = [
        NormalizationScheme::FirstOrderGCN,
        NormalizationScheme::AugNormAdj,
        NormalizationScheme::BingGeNormAdj,
        NormalizationScheme::AugRWalk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NormalizationScheme::FirstOrderGCN => "FirstOrderGCN",
            NormalizationScheme::AugNormAdj => "AugNormAdj",
            NormalizationScheme::BingGeNormAdj => "BingGeNormAdj",
            NormalizationScheme::AugRWalk => "AugRWalk",
        }
    }

    /// Whether the scheme yields a symmetric matrix for symmetric input.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, NormalizationScheme::AugRWalk)
    }
}

impl fmt::Display for NormalizationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormalizationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NormalizationScheme::ALL
            .into_iter()
            .find(|scheme| scheme.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown normalization `{s}` (expected FirstOrderGCN, AugNormAdj, BingGeNormAdj or AugRWalk)"
                ))
            })
    }
}

/// Row sums of a square matrix.
pub fn degrees(a: &SparseMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::dim(
            "degrees",
            "square matrix",
            format!("{}x{}", a.n_rows(), a.n_cols()),
        ));
    }
    Ok(a.row_sums())
}

/// Applies `scheme` to an adjacency with zero diagonal and nonnegative
/// weights. Isolated nodes keep only their self-loop term.
pub fn normalize(a: &SparseMatrix, scheme: NormalizationScheme) -> Result<SparseMatrix> {
    let deg = degrees(a)?;
    if let Some(v) = a.values().iter().find(|v| **v < 0.0) {
        return Err(Error::Domain(format!(
            "normalization requires nonnegative weights, found {v}"
        )));
    }
    if !a.has_zero_diagonal() {
        return Err(Error::Domain(
            "adjacency must not store self-loops; they are added by normalization".into(),
        ));
    }
    let n = a.n_rows();

    let entries: Vec<(usize, usize, f64)> = match scheme {
        NormalizationScheme::FirstOrderGCN => {
            let inv_sqrt: Vec<f64> = deg
                .iter()
                .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
                .collect();
            a.triplets()
                .map(|(i, j, v)| (i, j, inv_sqrt[i] * v * inv_sqrt[j]))
                .chain((0..n).map(|i| (i, i, 1.0)))
                .collect()
        }
        NormalizationScheme::AugNormAdj | NormalizationScheme::BingGeNormAdj => {
            let inv_sqrt: Vec<f64> = deg.iter().map(|&d| 1.0 / (d + 1.0).sqrt()).collect();
            let extra = if scheme == NormalizationScheme::BingGeNormAdj {
                1.0
            } else {
                0.0
            };
            a.triplets()
                .map(|(i, j, v)| (i, j, inv_sqrt[i] * v * inv_sqrt[j]))
                .chain((0..n).map(|i| (i, i, inv_sqrt[i] * inv_sqrt[i] + extra)))
                .collect()
        }
        NormalizationScheme::AugRWalk => {
            let inv: Vec<f64> = deg.iter().map(|&d| 1.0 / (d + 1.0)).collect();
            a.triplets()
                .map(|(i, j, v)| (i, j, inv[i] * v))
                .chain((0..n).map(|i| (i, i, inv[i])))
                .collect()
        }
    };
    SparseMatrix::from_triplets(n, n, entries)
}

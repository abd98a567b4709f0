use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::eigen::{analyze, DEFAULT_CLUSTER_TOL};
use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::{connected_components, degrees, normalize, NormalizationScheme, SparseMatrix};

fn check_adjacency(a: &SparseMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dim(
            "effective resistance",
            "a square adjacency",
            format!("{}x{}", a.n_rows(), a.n_cols()),
        ));
    }
    if !a.is_symmetric(0.0) || !a.has_zero_diagonal() {
        return Err(Error::Domain(
            "effective resistance needs a symmetric adjacency without self-loops".into(),
        ));
    }
    Ok(())
}

/// Pairwise effective resistances with unit edge conductances. Pairs in
/// different components get infinity.
pub fn resistance_matrix(a: &SparseMatrix) -> Result<Matrix> {
    check_adjacency(a)?;
    let n = a.n_rows();
    let deg = degrees(a)?;
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for (i, j, v) in a.triplets() {
        lap[(i, j)] -= v;
    }
    for (i, d) in deg.iter().enumerate() {
        lap[(i, i)] += d;
    }
    let eig = SymmetricEigen::new(lap);
    let top = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let cutoff = 1e-9 * top;
    let mut pinv = DMatrix::<f64>::zeros(n, n);
    for (k, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu > cutoff {
            let v = eig.eigenvectors.column(k);
            pinv += (v * v.transpose()) / mu;
        }
    }
    let comps = connected_components(a)?;
    Ok(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else if comps.same(i, j) {
            pinv[(i, i)] + pinv[(j, j)] - 2.0 * pinv[(i, j)]
        } else {
            f64::INFINITY
        }
    }))
}

/// `(e_s - e_t)ᵀ L⁺ (e_s - e_t)`, or infinity when `s` and `t` are not
/// connected.
pub fn effective_resistance(a: &SparseMatrix, s: usize, t: usize) -> Result<f64> {
    let n = a.n_rows();
    if s >= n || t >= n {
        return Err(Error::Domain(format!(
            "node {} out of range for {n} nodes",
            s.max(t)
        )));
    }
    Ok(resistance_matrix(a)?.get(s, t))
}

#[derive(Clone, Debug, Serialize)]
pub struct ResistanceBoundReport {
    pub lambda: f64,
    pub pairs_checked: usize,
    pub violations: usize,
    /// Minimum over pairs of `λ - (1 - (1/R_st)(1/d_s + 1/d_t))`.
    pub worst_margin: f64,
    pub worst_pair: Option<(usize, usize)>,
}

impl ResistanceBoundReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `λ ≥ 1 - (1/R_st)(1/d_s + 1/d_t)` for every connected pair, with
/// `λ` taken from the renormalized adjacency with self-loops.
pub fn verify_resistance_bound(a: &SparseMatrix) -> Result<ResistanceBoundReport> {
    let res = resistance_matrix(a)?;
    let lambda = analyze(&normalize(a, NormalizationScheme::AugNormAdj)?, DEFAULT_CLUSTER_TOL)?
        .lambda();
    let deg = degrees(a)?;
    let n = a.n_rows();
    let mut report = ResistanceBoundReport {
        lambda,
        pairs_checked: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
        worst_pair: None,
    };
    for s in 0..n {
        for t in s + 1..n {
            let r = res.get(s, t);
            if !r.is_finite() {
                continue;
            }
            let rhs = 1.0 - (1.0 / deg[s] + 1.0 / deg[t]) / r;
            let margin = lambda - rhs;
            report.pairs_checked += 1;
            if margin < -1e-9 {
                report.violations += 1;
            }
            if margin < report.worst_margin {
                report.worst_margin = margin;
                report.worst_pair = Some((s, t));
            }
        }
    }
    Ok(report)
}

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::graph::{connected_components, SparseMatrix};

/// Eigenvalues within this distance of the largest one count as the top
/// cluster.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Size `M` of the top eigenvalue cluster.
    pub top_multiplicity: usize,
    /// Largest magnitude among the eigenvalues outside the top cluster;
    /// `None` when the cluster is the whole spectrum.
    pub second_largest: Option<f64>,
    /// `N x M` orthonormal eigenvectors spanning the top cluster.
    pub basis: Matrix,
    pub component_count: usize,
}

impl SpectralReport {
    /// `λ`, with an empty complement read as 0.
    pub fn lambda(&self) -> f64 {
        self.second_largest.unwrap_or(0.0)
    }
}

/// Full dense eigendecomposition of a symmetric propagation matrix.
pub fn analyze(a_hat: &SparseMatrix, tol: f64) -> Result<SpectralReport> {
    if !a_hat.is_square() {
        return Err(Error::dim(
            "analyze",
            "a square matrix",
            format!("{}x{}", a_hat.n_rows(), a_hat.n_cols()),
        ));
    }
    let n = a_hat.n_rows();
    if n == 0 {
        return Err(Error::Domain("cannot analyze an empty matrix".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!("cluster tolerance must be nonnegative, got {tol}")));
    }
    let scale = a_hat.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if !a_hat.is_symmetric(1e-12 * scale) {
        return Err(Error::Domain(
            "spectral analysis needs a symmetric matrix; random-walk normalizations are not".into(),
        ));
    }
    let dense = a_hat.to_dense();
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (dense.get(i, j) + dense.get(j, i)));
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let top = eigenvalues[n - 1];
    let top_multiplicity = eigenvalues.iter().filter(|&&v| v >= top - tol).count();
    let rest = n - top_multiplicity;
    let second_largest = (rest > 0).then(|| {
        eigenvalues[..rest]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    });
    let cluster = &order[rest..];
    let basis = Matrix::from_fn(n, top_multiplicity, |i, c| eig.eigenvectors[(i, cluster[c])]);
    let component_count = connected_components(a_hat)?.count;
    Ok(SpectralReport {
        eigenvalues,
        top_multiplicity,
        second_largest,
        basis,
        component_count,
    })
}

/// `‖(I - E Eᵀ) H‖_F` for an orthonormal `E`.
pub fn subspace_distance(h: &Matrix, basis: &Matrix) -> Result<f64> {
    if h.rows() != basis.rows() {
        return Err(Error::dim("subspace_distance", basis.rows(), h.rows()));
    }
    let coeffs = basis.matmul_tn(h)?;
    let projected = basis.matmul(&coeffs)?;
    Ok(h.sub(&projected)?.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize, NormalizationScheme};

    fn aug(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
        let a = SparseMatrix::from_undirected_edges(n, edges).unwrap();
        normalize(&a, NormalizationScheme::AugNormAdj).unwrap()
    }

    #[test]
    fn single_edge() {
        let r = analyze(&aug(2, &[(0, 1)]), DEFAULT_CLUSTER_TOL).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-12 && (r.eigenvalues[1] - 1.0).abs() < 1e-12);
        assert_eq!(r.top_multiplicity, 1);
        assert!(r.second_largest.unwrap().abs() < 1e-12);
    }

    #[test]
    fn two_pairs() {
        let r = analyze(&aug(4, &[(0, 1), (2, 3)]), DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(r.top_multiplicity, 2);
        assert_eq!(r.component_count, 2);
        let gram = r.basis.matmul_tn(&r.basis).unwrap();
        assert!(gram.max_abs_diff(&Matrix::identity(2)) < 1e-8);
    }

    #[test]
    fn triangle_spectrum() {
        let r = analyze(&aug(3, &[(0, 1), (1, 2), (0, 2)]), DEFAULT_CLUSTER_TOL).unwrap();
        let expect = [0.0, 0.0, 1.0];
        for (a, b) in r.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(r.lambda() < 1e-12);
    }

    #[test]
    fn edgeless_graph_has_full_cluster() {
        let r = analyze(&aug(3, &[]), DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(r.top_multiplicity, 3);
        assert_eq!(r.second_largest, None);
        assert_eq!(r.lambda(), 0.0);
    }

    #[test]
    fn random_walk_rejected() {
        let a = SparseMatrix::from_undirected_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let rw = normalize(&a, NormalizationScheme::AugRWalk).unwrap();
        assert!(matches!(analyze(&rw, DEFAULT_CLUSTER_TOL), Err(Error::Domain(_))));
    }

    #[test]
    fn distance_of_members_and_orthogonal_complement() {
        let r = analyze(&aug(4, &[(0, 1), (1, 2), (2, 3)]), DEFAULT_CLUSTER_TOL).unwrap();
        let c = Matrix::from_rows(&[vec![2.0, -1.0, 0.5]]).unwrap();
        let member = r.basis.matmul(&c).unwrap();
        assert!(subspace_distance(&member, &r.basis).unwrap() < 1e-10);
        assert!(subspace_distance(&Matrix::zeros(3, 1), &r.basis).is_err());
    }
}

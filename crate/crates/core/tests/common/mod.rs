//! Independent reference computations used as test oracles. Nothing here
//! calls into the linear algebra of the library under test.

#![allow(dead_code)]

use dropedge_core::{Matrix, SparseMatrix};

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(a: &SparseMatrix) -> Dense {
    let mut out = vec![vec![0.0; a.n_cols()]; a.n_rows()];
    for (i, j, v) in a.triplets() {
        out[i][j] = v;
    }
    out
}

pub fn matrix_to_dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn dense_to_matrix(d: &Dense) -> Matrix {
    Matrix::from_rows(d).unwrap()
}

pub fn transpose(a: &Dense) -> Dense {
    let (r, c) = (a.len(), a.first().map_or(0, Vec::len));
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn frobenius(a: &Dense) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn sub(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns ascending
/// eigenvalues and the matching eigenvectors as columns.
pub fn jacobi_eigen(a: &Dense) -> (Vec<f64>, Dense) {
    let n = a.len();
    let mut m = a.clone();
    let mut v: Dense = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[x][x].total_cmp(&m[y][y]));
    let vals = order.iter().map(|&k| m[k][k]).collect();
    let vecs = (0..n).map(|i| order.iter().map(|&k| v[i][k]).collect()).collect();
    (vals, vecs)
}

/// Gaussian elimination with partial pivoting; `b` may have several columns.
pub fn solve(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Dense = a
        .iter()
        .zip(b)
        .map(|(r, rb)| r.iter().chain(rb).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        assert!(d.abs() > 1e-14, "singular system");
        for r in 0..n {
            if r != col {
                let f = aug[r][col] / d;
                if f != 0.0 {
                    for k in col..n + m {
                        aug[r][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    (0..n)
        .map(|r| (0..m).map(|k| aug[r][n + k] / aug[r][r]).collect())
        .collect()
}

/// `min_C ‖H - E C‖_F` through the normal equations.
pub fn least_squares_residual(e: &Dense, h: &Dense) -> f64 {
    let et = transpose(e);
    let c = solve(&mul(&et, e), &mul(&et, h));
    frobenius(&sub(h, &mul(e, &c)))
}

pub fn degrees(a: &Dense) -> Vec<f64> {
    a.iter().map(|r| r.iter().sum()).collect()
}

/// `(D+I)^(-1/2) (A+I) (D+I)^(-1/2)` computed densely.
pub fn aug_norm_adj(a: &Dense) -> Dense {
    let d = degrees(a);
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let aij = a[i][j] + if i == j { 1.0 } else { 0.0 };
                    aij / ((d[i] + 1.0) * (d[j] + 1.0)).sqrt()
                })
                .collect()
        })
        .collect()
}

/// Component labels by repeated relaxation; deliberately not a BFS.
pub fn components(a: &Dense) -> Vec<usize> {
    let n = a.len();
    let mut label: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i != j && a[i][j] != 0.0 && label[j] < label[i] {
                    label[i] = label[j];
                    changed = true;
                }
            }
        }
        if !changed {
            return label;
        }
    }
}

/// Effective resistance by grounding `t` within the component of `s` and
/// solving the reduced Laplacian system for a unit current injected at `s`.
pub fn grounded_resistance(a: &Dense, s: usize, t: usize) -> f64 {
    let label = components(a);
    if label[s] != label[t] {
        return f64::INFINITY;
    }
    if s == t {
        return 0.0;
    }
    let nodes: Vec<usize> = (0..a.len())
        .filter(|&k| label[k] == label[s] && k != t)
        .collect();
    let d = degrees(a);
    let lap: Dense = nodes
        .iter()
        .map(|&i| {
            nodes
                .iter()
                .map(|&j| if i == j { d[i] } else { -a[i][j] })
                .collect()
        })
        .collect();
    let rhs: Dense = nodes
        .iter()
        .map(|&k| vec![if k == s { 1.0 } else { 0.0 }])
        .collect();
    let x = solve(&lap, &rhs);
    let pos = nodes.iter().position(|&k| k == s).unwrap();
    x[pos][0]
}

/// Central differences of `f` at every entry of `x`.
pub fn finite_difference(x: &Matrix, step: f64, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for k in 0..x.len() {
        let orig = probe.as_slice()[k];
        probe.as_mut_slice()[k] = orig + step;
        let up = f(&probe);
        probe.as_mut_slice()[k] = orig - step;
        let down = f(&probe);
        probe.as_mut_slice()[k] = orig;
        grad.as_mut_slice()[k] = (up - down) / (2.0 * step);
    }
    grad
}

/// `‖a - b‖ / max(‖a‖, ‖b‖, 1e-8)`.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let diff: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / a.frobenius_norm().max(b.frobenius_norm()).max(1e-8)
}

pub fn approx_eq_dense(a: &Dense, b: &Dense, tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(r, s)| {
            r.len() == s.len() && r.iter().zip(s).all(|(x, y)| (x - y).abs() <= tol)
        })
}

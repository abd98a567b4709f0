use rayon::prelude::*;

use crate::dense::Matrix;
use crate::error::{Error, Result};

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row and explicit zeros
/// are pruned at construction time.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate positions
    /// are summed, then zeros are dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= n_rows || c >= n_cols {
                return Err(Error::dim(
                    "SparseMatrix::from_triplets",
                    format!("index within {n_rows}x{n_cols}"),
                    format!("({r}, {c})"),
                ));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut rows_of = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if rows_of.last() == Some(&r) && col_indices.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows_of.push(r);
                col_indices.push(c);
                values.push(v);
            }
        }
        let mut kept_cols = Vec::with_capacity(col_indices.len());
        let mut kept_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows_of.into_iter().zip(col_indices).zip(values) {
            if v != 0.0 {
                row_offsets[r + 1] += 1;
                kept_cols.push(c);
                kept_vals.push(v);
            }
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices: kept_cols,
            values: kept_vals,
        })
    }

    /// Validates raw CSR arrays against the structural invariants.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 || row_offsets[0] != 0 {
            return Err(Error::dim(
                "SparseMatrix::from_csr",
                format!("{} row offsets starting at 0", n_rows + 1),
                row_offsets.len(),
            ));
        }
        if col_indices.len() != values.len() || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::dim(
                "SparseMatrix::from_csr",
                format!("{} stored entries", row_offsets.last().unwrap()),
                format!("{} columns / {} values", col_indices.len(), values.len()),
            ));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::Domain(format!("row offsets decrease at row {i}")));
            }
            for k in lo..hi {
                if col_indices[k] >= n_cols {
                    return Err(Error::Domain(format!(
                        "column {} out of range in row {i}",
                        col_indices[k]
                    )));
                }
                if k > lo && col_indices[k] <= col_indices[k - 1] {
                    return Err(Error::Domain(format!(
                        "column indices not strictly increasing in row {i}"
                    )));
                }
                if values[k] == 0.0 {
                    return Err(Error::Domain(format!("explicit zero stored in row {i}")));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Unweighted symmetric adjacency from an undirected edge list. Reversed
    /// and repeated pairs collapse to one edge; self-loops are rejected.
    pub fn from_undirected_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(Error::Domain(format!("self-loop at node {u}")));
            }
            pairs.push((u.min(v), u.max(v)));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Self::from_triplets(
            n,
            n,
            pairs
                .into_iter()
                .flat_map(|(u, v)| [(u, v, 1.0), (v, u, 1.0)]),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        self.col_indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        match self.col_indices[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Upper-triangular `(i, j)` positions with `i < j`: one entry per
    /// undirected edge of a symmetric adjacency.
    pub fn upper_edges(&self) -> Vec<(usize, usize)> {
        self.triplets()
            .filter(|&(i, j, _)| i < j)
            .map(|(i, j, _)| (i, j))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n_rows.min(self.n_cols)).all(|i| self.get(i, i) == 0.0)
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(
            self.n_cols,
            self.n_rows,
            self.triplets().map(|(i, j, v)| (j, i, v)),
        )
        .expect("transpose of a valid matrix is valid")
    }

    /// Same sparsity pattern both ways and values equal within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        t.row_offsets == self.row_offsets
            && t.col_indices == self.col_indices
            && t
                .values
                .iter()
                .zip(&self.values)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            out.set(i, j, v);
        }
        out
    }

    /// Keeps entries for which `keep(i, j, v)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> SparseMatrix {
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                if keep(i, j, v) {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Sparse-dense product `self · h`.
    pub fn spmm(&self, h: &Matrix) -> Result<Matrix> {
        if self.n_cols != h.rows() {
            return Err(Error::dim(
                "spmm",
                format!("{} rows in dense operand", self.n_cols),
                h.rows(),
            ));
        }
        let width = h.cols();
        let mut out = Matrix::zeros(self.n_rows, width);
        if width == 0 {
            return Ok(out);
        }
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            for (j, v) in self.row(i) {
                for (o, &x) in out_row.iter_mut().zip(h.row(j)) {
                    *o += v * x;
                }
            }
        };
        if self.n_rows >= 64 {
            out.as_mut_slice()
                .par_chunks_mut(width)
                .enumerate()
                .for_each(kernel);
        } else {
            out.as_mut_slice()
                .chunks_mut(width)
                .enumerate()
                .for_each(kernel);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_prune_zeros() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            [(0, 2, 1.0), (0, 0, 2.0), (0, 2, 1.5), (1, 1, 0.0), (1, 0, -1.0)],
        )
        .unwrap();
        assert_eq!(m.row_offsets(), &[0, 2, 3]);
        assert_eq!(m.col_indices(), &[0, 2, 0]);
        assert_eq!(m.values(), &[2.0, 2.5, -1.0]);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(SparseMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn csr_validation_catches_unsorted_columns() {
        let bad = SparseMatrix::from_csr(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(bad.is_err());
        let zero = SparseMatrix::from_csr(1, 3, vec![0, 1], vec![1], vec![0.0]);
        assert!(zero.is_err());
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 1], vec![1], vec![3.0]).is_ok());
    }

    #[test]
    fn undirected_edges_dedup_and_symmetrize() {
        let a = SparseMatrix::from_undirected_edges(3, &[(0, 1), (1, 0), (1, 2), (1, 2)]).unwrap();
        assert_eq!(a.nnz(), 4);
        assert!(a.is_symmetric(0.0));
        assert_eq!(a.upper_edges(), vec![(0, 1), (1, 2)]);
        assert!(SparseMatrix::from_undirected_edges(3, &[(2, 2)]).is_err());
    }

    #[test]
    fn spmm_with_identity_is_noop() {
        let h = Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(SparseMatrix::identity(4).spmm(&h).unwrap(), h);
        assert!(SparseMatrix::identity(3).spmm(&h).is_err());
    }
}

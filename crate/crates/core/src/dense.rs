//! Row-major dense `f64` matrices and the handful of kernels the models need.
//!
//! Products are parallelized over blocks of output rows only, so every output
//! entry is reduced in a fixed order and results do not depend on the thread
//! count. Dense blocks go through `matrixmultiply`; left operands that are
//! mostly zeros (bag-of-words features) use a row kernel that skips them.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows of work below which the kernels stay on the calling thread.
const PAR_MIN_ROWS: usize = 64;

/// Output rows handed to one GEMM call.
const GEMM_BLOCK_ROWS: usize = 64;

/// Left operands with a smaller fraction of nonzeros take the sparse path.
const SPARSE_LEFT_DENSITY: f64 = 0.2;

fn density(data: &[f64]) -> f64 {
    if data.is_empty() {
        return 1.0;
    }
    data.iter().filter(|v| **v != 0.0).count() as f64 / data.len() as f64
}

/// `out = A B` with `A` (`n x k`) and `B` (`k x m`) given by element strides;
/// `out` is row-major `n x m`.
fn gemm(
    n: usize,
    k: usize,
    m: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    out: &mut [f64],
) {
    if n == 0 || m == 0 {
        return;
    }
    let (rsa, csa) = a_strides;
    let (rsb, csb) = b_strides;
    let block = |(blk, chunk): (usize, &mut [f64])| {
        let rows = chunk.len() / m;
        let offset = blk * GEMM_BLOCK_ROWS * rsa;
        // SAFETY: the slices cover every index reachable through the given
        // dimensions and strides, and `chunk` is exclusively borrowed.
        unsafe {
            matrixmultiply::dgemm(
                rows,
                k,
                m,
                1.0,
                a.as_ptr().add(offset),
                rsa as isize,
                csa as isize,
                b.as_ptr(),
                rsb as isize,
                csb as isize,
                0.0,
                chunk.as_mut_ptr(),
                m as isize,
                1,
            );
        }
    };
    if n >= PAR_MIN_ROWS {
        out.par_chunks_mut(GEMM_BLOCK_ROWS * m)
            .enumerate()
            .for_each(block);
    } else {
        out.chunks_mut(GEMM_BLOCK_ROWS * m)
            .enumerate()
            .for_each(block);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Matrix::from_vec",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::dim(
                    "Matrix::from_rows",
                    format!("{cols} columns"),
                    format!("{} in row {i}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        self.map(|v| v * factor)
    }

    fn check_same_shape(&self, other: &Matrix, context: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(
                context,
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other, "Matrix::add")?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other, "Matrix::sub")?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub(crate) fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Index of the largest entry in each row (first on ties).
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Columns `[start, start + width)` as a new matrix.
    pub fn column_block(&self, start: usize, width: usize) -> Matrix {
        let mut out = Matrix::zeros(self.rows, width);
        for i in 0..self.rows {
            out.row_mut(i)
                .copy_from_slice(&self.row(i)[start..start + width]);
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.row(i));
        }
        out
    }

    /// `self · other`. When `self` is mostly zeros its zero entries are
    /// skipped, which makes the product cheap for bag-of-words features.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim(
                "matmul",
                format!("inner dimension {}", self.cols),
                other.rows,
            ));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(n, m);
        if m == 0 {
            return Ok(out);
        }
        if k == 0 {
            return Ok(out);
        }
        if density(&self.data) >= SPARSE_LEFT_DENSITY {
            gemm(
                n,
                k,
                m,
                &self.data,
                (k, 1),
                &other.data,
                (m, 1),
                &mut out.data,
            );
            return Ok(out);
        }
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a_row = &self.data[i * k..(i + 1) * k];
            for (kk, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[kk * m..(kk + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        if n >= PAR_MIN_ROWS {
            out.data.par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(m).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dim(
                "matmul_nt",
                format!("inner dimension {}", self.cols),
                other.cols,
            ));
        }
        let (n, k, m) = (self.rows, self.cols, other.rows);
        let mut out = Matrix::zeros(n, m);
        if k > 0 {
            gemm(
                n,
                k,
                m,
                &self.data,
                (k, 1),
                &other.data,
                (1, k),
                &mut out.data,
            );
        }
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::dim(
                "matmul_tn",
                format!("shared row count {}", self.rows),
                other.rows,
            ));
        }
        let (n, k, m) = (self.cols, self.rows, other.cols);
        let mut out = Matrix::zeros(n, m);
        if density(&self.data) < SPARSE_LEFT_DENSITY {
            // Scatter each nonzero into its output row, in a fixed order.
            for p in 0..k {
                let b_row = other.row(p);
                for (i, &a) in self.row(p).iter().enumerate() {
                    if a != 0.0 {
                        for (o, &b) in out.data[i * m..(i + 1) * m].iter_mut().zip(b_row) {
                            *o += a * b;
                        }
                    }
                }
            }
            return Ok(out);
        }
        if k > 0 {
            gemm(
                n,
                k,
                m,
                &self.data,
                (1, n),
                &other.data,
                (m, 1),
                &mut out.data,
            );
        }
        Ok(out)
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[17.0, 39.0]);
        assert!(b.matmul(&a).is_err());
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let a = Matrix::from_fn(70, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let b = Matrix::from_fn(70, 4, |i, j| ((i + 2 * j) % 5) as f64 * 0.5);
        let tn = a.matmul_tn(&b).unwrap();
        let expect = a.transpose().matmul(&b).unwrap();
        assert_eq!(tn, expect);
        let c = Matrix::from_fn(3, 5, |i, j| (i as f64) - (j as f64));
        let nt = a.matmul_nt(&c).unwrap();
        assert_eq!(nt, a.matmul(&c.transpose()).unwrap());
    }

    #[test]
    fn argmax_breaks_ties_to_first() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![0.0, 2.0, 3.0]]).unwrap();
        assert_eq!(m.argmax_rows(), vec![0, 2]);
    }
}

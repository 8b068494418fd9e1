//! Dense row-major matrices and the handful of GEMM shapes the layers need.

use serde::{Deserialize, Serialize};

/// Row-major `rows × cols` block of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix buffer length");
        Self { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(cols: usize, rows: &[R]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "row length");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
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
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-width matrix has no meaningful rows anyway
        let width = self.cols.max(1);
        self.data.chunks_exact(width).take(if self.cols == 0 { 0 } else { self.rows })
    }

    /// Gathers `idx` rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.row(i));
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "hcat row count");
        let cols = self.cols + other.cols;
        let mut out = Matrix::zeros(self.rows, cols);
        for i in 0..self.rows {
            let row = out.row_mut(i);
            row[..self.cols].copy_from_slice(self.row(i));
            row[self.cols..].copy_from_slice(other.row(i));
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out = input · Wᵀ + b` where `weights` is `out_dim × in_dim` row-major.
pub(crate) fn affine_forward(input: &Matrix, weights: &[f64], bias: &[f64], out: &mut Matrix) {
    let (m, k, n) = (input.rows, input.cols, bias.len());
    assert_eq!(weights.len(), n * k);
    assert_eq!((out.rows, out.cols), (m, n));
    for i in 0..m {
        out.row_mut(i).copy_from_slice(bias);
    }
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    // SAFETY: pointer extents are checked by the asserts above; the strides
    // describe input (m×k, row-major), Wᵀ (k×n, view of n×k row-major) and
    // out (m×n, row-major).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            input.data.as_ptr(),
            k as isize,
            1,
            weights.as_ptr(),
            1,
            k as isize,
            1.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `grad_w += d_outᵀ · input`, `grad_b += column sums of d_out`.
pub(crate) fn affine_param_grad(
    input: &Matrix,
    d_out: &Matrix,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) {
    let (m, k, n) = (input.rows, input.cols, d_out.cols);
    assert_eq!(d_out.rows, m);
    assert_eq!(grad_w.len(), n * k);
    assert_eq!(grad_b.len(), n);
    for row in d_out.iter_rows() {
        for (g, d) in grad_b.iter_mut().zip(row) {
            *g += d;
        }
    }
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    // SAFETY: d_outᵀ is an n×m view of the m×n row-major buffer; input is m×k
    // row-major; grad_w is n×k row-major. Extents checked above.
    unsafe {
        matrixmultiply::dgemm(
            n,
            m,
            k,
            1.0,
            d_out.data.as_ptr(),
            1,
            n as isize,
            input.data.as_ptr(),
            k as isize,
            1,
            1.0,
            grad_w.as_mut_ptr(),
            k as isize,
            1,
        );
    }
}

/// `d_in = d_out · W`.
pub(crate) fn affine_input_grad(d_out: &Matrix, weights: &[f64], in_dim: usize) -> Matrix {
    let (m, n) = (d_out.rows, d_out.cols);
    assert_eq!(weights.len(), n * in_dim);
    let mut d_in = Matrix::zeros(m, in_dim);
    if m == 0 || n == 0 || in_dim == 0 {
        return d_in;
    }
    // SAFETY: d_out is m×n row-major, W is n×in_dim row-major, d_in m×in_dim.
    unsafe {
        matrixmultiply::dgemm(
            m,
            n,
            in_dim,
            1.0,
            d_out.data.as_ptr(),
            n as isize,
            1,
            weights.as_ptr(),
            in_dim as isize,
            1,
            0.0,
            d_in.data.as_mut_ptr(),
            in_dim as isize,
            1,
        );
    }
    d_in
}

//! Small dense row-major matrix used for network state and mixing.
//!
//! All reductions run in a fixed index order so that results are
//! bit-identical across runs and thread counts.

use std::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * rhs`, accumulating over the inner index in increasing order.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (j, &w) in self.row(i).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (o, &v) in out_row.iter_mut().zip(rhs.row(j)) {
                    *o += w * v;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        self.iter_rows().map(|r| dot(r, v)).collect()
    }

    /// `selfᵀ v` without materializing the transpose.
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "tr_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (r, &s) in self.iter_rows().zip(v) {
            axpy(s, r, &mut out);
        }
        out
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for r in self.iter_rows() {
            for (a, &ra) in r.iter().enumerate() {
                let g_row = g.row_mut(a);
                for (gb, &rb) in g_row.iter_mut().zip(r) {
                    *gb += ra * rb;
                }
            }
        }
        g
    }

    /// Column means, summing rows in index order.
    pub fn col_means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (o, &v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        let n = self.rows as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Entry-wise `self - alpha * other`.
    pub fn sub_scaled(&self, alpha: f64, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - alpha * b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.sub_scaled(1.0, other)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration. Returns `(eigenvalue, iterations)` or the final residual
/// `‖Gv − μv‖` if the Rayleigh quotient has not settled.
pub fn power_iteration_psd(
    g: &Matrix,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, usize), f64> {
    let d = g.rows();
    if d == 0 {
        return Ok((0.0, 0));
    }
    // Fixed, non-degenerate start vector.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.5 * ((i as f64) * 0.754_877_666).sin()).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut mu = dot(&v, &g.matvec(&v));
    for it in 1..=max_iter {
        let w = g.matvec(&v);
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok((0.0, it));
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let next = dot(&v, &g.matvec(&v));
        if (next - mu).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok((next, it));
        }
        mu = next;
    }
    let gv = g.matvec(&v);
    let resid: Vec<f64> = gv.iter().zip(&v).map(|(a, b)| a - mu * b).collect();
    Err(norm(&resid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_hand_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Matrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]);
        assert_eq!(a.matmul(&b), Matrix::from_rows(&[vec![19.0, 22.0], vec![43.0, 50.0]]));
    }

    #[test]
    fn gram_equals_transpose_product() {
        let a = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![3.0, 4.0, 1.0]]);
        assert_eq!(a.gram(), a.transpose().matmul(&a));
        assert_eq!(a.tr_matvec(&[1.0, 2.0]), vec![7.0, 6.0, 2.5]);
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let mut g = Matrix::zeros(3, 3);
        g[(0, 0)] = 1.0;
        g[(1, 1)] = 5.0;
        g[(2, 2)] = 2.0;
        let (mu, _) = power_iteration_psd(&g, 1e-12, 10_000).unwrap();
        assert!((mu - 5.0).abs() < 1e-9);
    }

    #[test]
    fn col_means_in_order() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 6.0]]);
        assert_eq!(a.col_means(), vec![2.0, 4.0]);
    }
}

//! Dense row-major matrix and the handful of least-squares routines the
//! estimators need. Factorizations are delegated to `nalgebra`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Parameter(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Parameter("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            if c.len() != n {
                return Err(Error::Parameter("ragged columns".into()));
            }
            for (i, &v) in c.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
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

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows at `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = m.row_mut(i);
            for (k, &j) in idx.iter().enumerate() {
                dst[k] = src[j];
            }
        }
        m
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Parameter("hstack: row counts differ".into()));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix { rows: self.rows, cols, data })
    }

    pub fn with_intercept(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * (self.cols + 1));
        for i in 0..self.rows {
            data.push(1.0);
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: self.rows, cols: self.cols + 1, data }
    }
}

/// `A' B` for row-major matrices with equal row counts.
pub fn cross(a: &Matrix, b: &Matrix) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.ncols(), b.ncols());
    for i in 0..a.nrows() {
        let ra = a.row(i);
        let rb = b.row(i);
        for (p, &va) in ra.iter().enumerate() {
            if va == 0.0 {
                continue;
            }
            for (q, &vb) in rb.iter().enumerate() {
                out[(p, q)] += va * vb;
            }
        }
    }
    out
}

pub fn cross_vec(a: &Matrix, y: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(a.ncols());
    for (i, &yi) in y.iter().enumerate() {
        for (p, &va) in a.row(i).iter().enumerate() {
            out[p] += va * yi;
        }
    }
    out
}

pub fn matvec(a: &Matrix, beta: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| a.row(i).iter().zip(beta).fold(0.0, |acc, (x, b)| acc + x * b))
        .collect()
}

/// Inverse of a symmetric positive-definite (or at least invertible) matrix.
pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.inverse());
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular matrix in least-squares solve".into()))
}

/// Ordinary least squares fit.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `(X'X)^{-1}`, kept for sandwich variances.
    pub xtx_inv: DMatrix<f64>,
}

pub fn ols(x: &Matrix, y: &[f64]) -> Result<OlsFit> {
    if x.nrows() != y.len() {
        return Err(Error::Parameter("ols: X and y lengths differ".into()));
    }
    if x.nrows() < x.ncols() {
        return Err(Error::Numerical("ols: fewer rows than columns".into()));
    }
    let xtx = cross(x, x);
    let xty = cross_vec(x, y);
    let xtx_inv = inverse(&xtx)?;
    let coef: Vec<f64> = (&xtx_inv * &xty).iter().copied().collect();
    let fitted = matvec(x, &coef);
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok(OlsFit { coef, residuals, xtx_inv })
}

/// HC1 sandwich covariance `n/(n-k) (X'X)^{-1} (sum e_i^2 x_i x_i') (X'X)^{-1}`.
pub fn hc1_covariance(x: &Matrix, residuals: &[f64], xtx_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let k = x.ncols();
    let mut meat = DMatrix::zeros(k, k);
    for i in 0..n {
        let e2 = residuals[i] * residuals[i];
        let r = x.row(i);
        for p in 0..k {
            let a = r[p] * e2;
            if a == 0.0 {
                continue;
            }
            for q in 0..k {
                meat[(p, q)] += a * r[q];
            }
        }
    }
    let scale = n as f64 / (n as f64 - k as f64).max(1.0);
    (xtx_inv * meat * xtx_inv) * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_line() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap();
        let y = [1.0, 3.0, 5.0, 7.0];
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coef[0] - 1.0).abs() < 1e-12);
        assert!((fit.coef[1] - 2.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn select_and_stack() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let s = m.select_rows(&[2, 0]);
        assert_eq!(s.row(0), &[5.0, 6.0]);
        let c = m.select_columns(&[1]);
        assert_eq!(c.column(0), vec![2.0, 4.0, 6.0]);
        let h = m.hstack(&c).unwrap();
        assert_eq!(h.row(1), &[3.0, 4.0, 4.0]);
        assert_eq!(m.with_intercept().row(0), &[1.0, 1.0, 2.0]);
    }
}

//! Small dense f64 matrices for the statistics-heavy paths: channel
//! covariances, whitening/coloring transforms, and attention energies.
//!
//! Feature maps stay f32; everything that feeds an eigensolver or a softmax
//! runs in f64 so tolerances hold at realistic channel counts.

use crate::error::{Error, Result};
use crate::parallel;

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        assert!(rows > 0 && cols > 0, "dims must be positive");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix dims must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self * other`. Each output row is produced by one task with the inner
    /// accumulation running over `k` in ascending order, so results are
    /// thread-count independent.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, k_n, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(n, m);
        parallel::for_each_chunk(&mut out.data, m, |r, row| {
            let lhs = self.row(r);
            for k in 0..k_n {
                let a = lhs[k];
                if a == 0.0 {
                    continue;
                }
                let rhs = other.row(k);
                for (slot, &b) in row.iter_mut().zip(rhs) {
                    *slot += a * b;
                }
            }
        });
        Ok(out)
    }

    /// Max absolute entry difference; matrices must have equal shape.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Eigendecomposition of a symmetric matrix: `values[i]` pairs with the
/// eigenvector stored in column `i` of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigendecomposition for symmetric matrices.
///
/// Sweeps rotate away every off-diagonal pair until the off-diagonal entries
/// are negligible against the matrix norm. Eigenpairs are sorted by
/// descending eigenvalue. Fails on non-square input or if the iteration does
/// not settle, which for a symmetric matrix it always does in practice.
pub fn sym_eig(m: &Matrix) -> Result<SymEig> {
    if m.rows != m.cols {
        return Err(Error::Dimension(format!("sym_eig on {}x{}", m.rows, m.cols)));
    }
    let n = m.rows;
    let mut a = m.clone();
    let mut v = Matrix::identity(n);

    let frob: f64 = a.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-10 * frob.max(f64::MIN_POSITIVE);

    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    s += a.get(r, c) * a.get(r, c);
                }
            }
        }
        s.sqrt()
    };

    let max_sweeps = 64;
    let mut converged = off(&a) <= tol;
    for _ in 0..max_sweeps {
        if converged {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                // classic Jacobi rotation angle
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
        converged = off(&a) <= tol;
    }
    if !converged {
        return Err(Error::Numerical("eigendecomposition did not converge".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, dst, v.get(k, src));
        }
    }
    Ok(SymEig { values, vectors })
}

/// Row-wise softmax with max subtraction; every output row sums to 1.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let cols = m.cols;
    let mut out = Matrix::zeros(m.rows, cols);
    parallel::for_each_chunk(&mut out.data, cols, |r, row| {
        let src = m.row(r);
        let max = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (slot, &v) in row.iter_mut().zip(src) {
            let e = (v - max).exp();
            *slot = e;
            sum += e;
        }
        for slot in row.iter_mut() {
            *slot /= sum;
        }
    });
    out
}

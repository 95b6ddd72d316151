//! Small dense/sparse helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Matrices with fewer than this fraction of nonzero entries use row-compressed storage
/// for repeated products.
pub const SPARSE_DENSITY: f64 = 0.05;

/// A square matrix prepared for repeated `Q z` and `p Q` products.
#[derive(Debug, Clone)]
pub enum Operator {
    Dense(DMatrix<f64>),
    /// Nonzeros per row as `(column, value)`.
    Sparse { n: usize, rows: Vec<Vec<(usize, f64)>> },
}

impl Operator {
    pub fn new(q: &DMatrix<f64>) -> Self {
        let n = q.nrows();
        let nnz = q.iter().filter(|x| **x != 0.0).count();
        if n > 0 && (nnz as f64) < SPARSE_DENSITY * (n * n) as f64 {
            let rows = (0..n)
                .map(|i| {
                    (0..q.ncols())
                        .filter(|&j| q[(i, j)] != 0.0)
                        .map(|j| (j, q[(i, j)]))
                        .collect()
                })
                .collect();
            Operator::Sparse { n, rows }
        } else {
            Operator::Dense(q.clone())
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Operator::Sparse { .. })
    }

    /// `Q z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Operator::Dense(q) => (0..q.nrows())
                .map(|i| q.row(i).iter().zip(z).map(|(a, b)| a * b).sum())
                .collect(),
            Operator::Sparse { rows, .. } => rows
                .iter()
                .map(|r| r.iter().map(|&(j, v)| v * z[j]).sum())
                .collect(),
        }
    }

    /// `p Q` for a row vector `p`.
    pub fn apply_left(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Operator::Dense(q) => (0..q.ncols())
                .map(|j| q.column(j).iter().zip(p).map(|(a, b)| a * b).sum())
                .collect(),
            Operator::Sparse { n, rows } => {
                let mut out = vec![0.0; *n];
                for (i, r) in rows.iter().enumerate() {
                    for &(j, v) in r {
                        out[j] += p[i] * v;
                    }
                }
                out
            }
        }
    }
}

pub fn solve(a: DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    a.lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(context.to_string()))
}

pub fn mat_vec(q: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    (q * DVector::from_column_slice(z)).as_slice().to_vec()
}

pub fn vec_mat(p: &[f64], q: &DMatrix<f64>) -> Vec<f64> {
    (DVector::from_column_slice(p).transpose() * q)
        .iter()
        .cloned()
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

pub fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

/// Maximum absolute row sum.
pub fn inf_norm(q: &DMatrix<f64>) -> f64 {
    (0..q.nrows())
        .map(|i| q.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest `|row sum - 1|`.
pub fn row_sum_defect(q: &DMatrix<f64>) -> f64 {
    (0..q.nrows())
        .map(|i| (q.row(i).sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

pub fn is_row_stochastic(q: &DMatrix<f64>, tol: f64) -> bool {
    q.is_square() && q.iter().all(|x| *x >= 0.0 && x.is_finite()) && row_sum_defect(q) <= tol
}

pub fn require_square(q: &DMatrix<f64>, what: &str) -> Result<usize> {
    if q.is_square() {
        Ok(q.nrows())
    } else {
        Err(Error::Dimension {
            what: format!("{what} (must be square)"),
            expected: q.nrows(),
            found: q.ncols(),
        })
    }
}

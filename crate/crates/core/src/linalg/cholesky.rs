//! Envelope (skyline) Cholesky factorization for sparse SPD matrices.
//!
//! Fine-grid matrices from the structured mesh have bandwidth `nx + 2` in
//! natural vertex order, and neighborhood-local matrices inherit that order,
//! so no fill-reducing permutation is applied.

use super::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    /// First stored column of each row.
    first: Vec<usize>,
    /// Offset of `L[i, first[i]]` in `values`.
    offsets: Vec<usize>,
    values: Vec<f64>,
}

/// Number of stored entries of the lower envelope of `a`.
pub fn envelope_size(a: &SparseMatrix) -> usize {
    (0..a.n_rows())
        .map(|i| {
            let (cols, _) = a.row(i);
            let f = cols.first().copied().unwrap_or(i).min(i);
            i - f + 1
        })
        .sum()
}

impl SparseCholesky {
    /// Factor a symmetric positive definite matrix. Only the lower triangle
    /// is read.
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.n_rows();
        if a.n_cols() != n {
            return Err(Error::input("cholesky of a non-square matrix"));
        }
        let mut first = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            let (cols, _) = a.row(i);
            let f = cols.first().copied().unwrap_or(i).min(i);
            first.push(f);
            offsets.push(total);
            total += i - f + 1;
        }
        offsets.push(total);
        let mut values = vec![0.0; total];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c <= i {
                    values[offsets[i] + c - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let oi = offsets[i];
            for j in fi..i {
                let fj = first[j];
                let oj = offsets[j];
                let k0 = fi.max(fj);
                let li = &values[oi + k0 - fi..oi + j - fi];
                let lj = &values[oj + k0 - fj..oj + j - fj];
                let s: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
                let ljj = values[oj + j - fj];
                values[oi + j - fi] = (values[oi + j - fi] - s) / ljj;
            }
            let row = &values[oi..oi + i - fi];
            let d = values[oi + i - fi] - row.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Solver {
                    message: format!("matrix not positive definite at pivot {i} ({d:.3e})"),
                    residual: f64::NAN,
                });
            }
            values[oi + i - fi] = d.sqrt();
        }
        Ok(Self {
            n,
            first,
            offsets,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "cholesky solve: dimension mismatch");
        for i in 0..self.n {
            let fi = self.first[i];
            let oi = self.offsets[i];
            let row = &self.values[oi..oi + i - fi];
            let s: f64 = row.iter().zip(&b[fi..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / self.values[oi + i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let oi = self.offsets[i];
            let xi = b[i] / self.values[oi + i - fi];
            b[i] = xi;
            let row = &self.values[oi..oi + i - fi];
            for (bk, &l) in b[fi..i].iter_mut().zip(row) {
                *bk -= l * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

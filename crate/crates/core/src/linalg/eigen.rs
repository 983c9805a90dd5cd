//! Dense symmetric eigensolvers.
//!
//! The standard problem is reduced to tridiagonal form with Householder
//! reflections and diagonalized with the implicit QL algorithm. The
//! generalized problem `A q = λ M q` is reduced to standard form through the
//! Cholesky factor of `M`.

use super::{DenseCholesky, DenseMatrix};
use crate::error::{Error, Result};

/// Eigenpairs sorted by ascending eigenvalue. Eigenvectors are the columns
/// of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

/// Householder tridiagonalization of a full symmetric matrix (row-major
/// working copy). Returns diagonal, off-diagonal (`e[i]` couples `i, i+1`),
/// and the reflectors `(v, beta)` with `v` acting on indices `k+1..n`.
fn tridiagonalize(mut a: DenseMatrix) -> (Vec<f64>, Vec<f64>, Vec<(Vec<f64>, f64)>) {
    let n = a.n_rows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        d[k] = a[(k, k)];
        let x: Vec<f64> = a.row(k)[k + 1..].to_vec();
        let m = x.len();
        let sigma: f64 = x[1..].iter().map(|v| v * v).sum();
        let mut v = x.clone();
        let beta;
        if sigma == 0.0 {
            e[k] = x[0];
            reflectors.push((vec![0.0; m], 0.0));
            continue;
        } else {
            let mu = (x[0] * x[0] + sigma).sqrt();
            let alpha = if x[0] <= 0.0 { mu } else { -mu };
            v[0] = x[0] - alpha;
            beta = 2.0 / (v[0] * v[0] + sigma);
            e[k] = alpha;
        }
        // Trailing block B = A[k+1.., k+1..]:  B <- H B H with H = I - beta v vᵀ.
        let off = k + 1;
        let pk = &mut p[..m];
        for i in 0..m {
            let row = &a.row(off + i)[off..];
            pk[i] = beta * row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        }
        let pv: f64 = pk.iter().zip(&v).map(|(a, b)| a * b).sum();
        let half = 0.5 * beta * pv;
        let w: Vec<f64> = pk.iter().zip(&v).map(|(pi, vi)| pi - half * vi).collect();
        for i in 0..m {
            let (vi, wi) = (v[i], w[i]);
            let row = &mut a.row_mut(off + i)[off..];
            for j in 0..m {
                row[j] -= vi * w[j] + wi * v[j];
            }
        }
        reflectors.push((v, beta));
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2, n - 2)];
        e[n - 2] = a[(n - 1, n - 2)];
    }
    if n >= 1 {
        d[n - 1] = a[(n - 1, n - 1)];
    }
    (d, e, reflectors)
}

/// Implicit QL on a symmetric tridiagonal matrix. `z` holds the rotation
/// accumulator with eigenvectors stored as rows.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut DenseMatrix>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Pencil("QL iteration failed to converge".into()));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        let ncol = z.n_cols();
                        let vals = z_rows_pair(z, i, ncol);
                        let (zi, zi1) = vals;
                        for k in 0..ncol {
                            let hk = zi1[k];
                            zi1[k] = s * zi[k] + c * hk;
                            zi[k] = c * zi[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn z_rows_pair(z: &mut DenseMatrix, i: usize, ncol: usize) -> (&mut [f64], &mut [f64]) {
    let (_, rest) = z.values_mut().split_at_mut(i * ncol);
    let (a, b) = rest.split_at_mut(ncol);
    (a, &mut b[..ncol])
}

/// Make the largest-magnitude component of `v` positive (first index wins
/// ties).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs: f64 = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs + 1e-14 * best_abs.max(0.0) {
            best = i;
            best_abs = x.abs();
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Eigenvectors returned as rows (transposed layout) for cache-friendly use.
fn sym_eig_rows(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.n_rows();
    let (mut d, mut e, reflectors) = tridiagonalize(a.clone());
    let mut z = DenseMatrix::identity(n);
    tridiagonal_ql(&mut d, &mut e, Some(&mut z))?;
    // Back-transform: eigenvector = H_0 H_1 ... H_{n-3} z.
    for r in 0..n {
        let row = z.row_mut(r);
        for (k, (v, beta)) in reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let seg = &mut row[k + 1..];
            let s: f64 = seg.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * beta;
            for (x, vi) in seg.iter_mut().zip(v) {
                *x -= s * vi;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut rows = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        rows.row_mut(dst).copy_from_slice(z.row(src));
    }
    Ok((values, rows))
}

/// Eigenvalues of a symmetric tridiagonal matrix (ascending).
pub fn tridiagonal_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Result<Vec<f64>> {
    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.resize(d.len(), 0.0);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Full eigendecomposition of a dense symmetric matrix.
pub fn sym_eig(a: &DenseMatrix) -> Result<EigenPairs> {
    if !a.is_square() {
        return Err(Error::input("sym_eig: matrix must be square"));
    }
    let (values, mut rows) = sym_eig_rows(a)?;
    for r in 0..rows.n_rows() {
        fix_sign(rows.row_mut(r));
    }
    Ok(EigenPairs {
        values,
        vectors: rows.transpose(),
    })
}

/// Solve `A q = λ M q` for symmetric `A` and symmetric positive definite
/// `M`. Eigenvalues ascend and eigenvectors satisfy `QᵀMQ = I`, with the
/// largest-magnitude component of each vector positive.
pub fn sym_generalized_eig(a: &DenseMatrix, m: &DenseMatrix) -> Result<EigenPairs> {
    if !a.is_square() || !m.is_square() || a.n_rows() != m.n_rows() {
        return Err(Error::input(format!(
            "generalized eigenproblem needs equal square matrices, got {}x{} and {}x{}",
            a.n_rows(),
            a.n_cols(),
            m.n_rows(),
            m.n_cols()
        )));
    }
    let n = a.n_rows();
    let chol = DenseCholesky::factor(m)
        .map_err(|e| Error::Pencil(format!("mass matrix factorization failed: {e}")))?;
    let l = chol.l();
    // X = L⁻¹ A, computed row by row.
    let lower_solve = |b: &DenseMatrix| -> DenseMatrix {
        let mut x = b.clone();
        for i in 0..n {
            for k in 0..i {
                let lik = l[(i, k)];
                if lik == 0.0 {
                    continue;
                }
                let (head, tail) = split_rows(&mut x, k, i);
                for (xi, xk) in tail.iter_mut().zip(head.iter()) {
                    *xi -= lik * xk;
                }
            }
            let inv = 1.0 / l[(i, i)];
            x.row_mut(i).iter_mut().for_each(|v| *v *= inv);
        }
        x
    };
    let x = lower_solve(a);
    let mut c = lower_solve(&x.transpose());
    c.symmetrize();
    let (values, mut rows) = sym_eig_rows(&c)?;
    for r in 0..n {
        let q = rows.row_mut(r);
        chol.backward(q);
        fix_sign(q);
    }
    Ok(EigenPairs {
        values,
        vectors: rows.transpose(),
    })
}

/// Borrow row `k` immutably and row `i` mutably (`k < i`).
fn split_rows(x: &mut DenseMatrix, k: usize, i: usize) -> (&[f64], &mut [f64]) {
    debug_assert!(k < i);
    let nc = x.n_cols();
    let all = x.values_mut();
    let (lo, hi) = all.split_at_mut(i * nc);
    (&lo[k * nc..(k + 1) * nc], &mut hi[..nc])
}

use super::{envelope_size, SparseCholesky, SparseMatrix};
use crate::error::{Error, Result};

/// Envelope sizes above this many entries go to conjugate gradients.
const MAX_DIRECT_ENVELOPE: usize = 40_000_000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(a: &SparseMatrix, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    rhs.iter().zip(&ax).map(|(b, y)| b - y).collect()
}

/// Jacobi-preconditioned conjugate gradients starting from `x0`.
///
/// Stops once `‖b - A x‖₂ ≤ tol ‖b‖₂` or after `max_iter` iterations.
pub fn pcg(
    a: &SparseMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.n_rows();
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = residual(a, &x, rhs);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        let rnorm = norm2(&r);
        if rnorm <= tol * bnorm {
            return Ok(x);
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver {
                message: "conjugate gradients met a non-positive curvature direction".into(),
                residual: rnorm / bnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // Recompute the true residual so drift in the recurrence is not reported.
    let res = norm2(&residual(a, &x, rhs)) / bnorm;
    if res <= tol {
        Ok(x)
    } else {
        Err(Error::Solver {
            message: format!("conjugate gradients did not converge in {max_iter} iterations"),
            residual: res,
        })
    }
}

/// Solve `A x = rhs` for symmetric positive definite `A`, returning `x` with
/// `‖A x - rhs‖₂ ≤ tol ‖rhs‖₂`.
///
/// Uses an envelope Cholesky factorization when it fits in memory and falls
/// back to (or polishes with) Jacobi-preconditioned CG otherwise.
pub fn spd_solve(a: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    if a.n_rows() != a.n_cols() || rhs.len() != a.n_rows() {
        return Err(Error::input(format!(
            "spd_solve: matrix {}x{} with rhs of length {}",
            a.n_rows(),
            a.n_cols(),
            rhs.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::input("spd_solve: tolerance must be positive"));
    }
    let n = a.n_rows();
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let max_iter = (10 * n).max(1000);
    if envelope_size(a) <= MAX_DIRECT_ENVELOPE {
        if let Ok(factor) = SparseCholesky::factor(a) {
            let x = factor.solve(rhs);
            let res = norm2(&residual(a, &x, rhs)) / bnorm;
            if res <= tol {
                return Ok(x);
            }
            return pcg(a, rhs, Some(&x), tol, max_iter);
        }
    }
    pcg(a, rhs, None, tol, max_iter)
}

//! Lowest eigenpairs of a sparse pencil `A x = λ M x` (`A` positive
//! semidefinite, `M` positive definite) by shift-invert subspace iteration
//! with Rayleigh–Ritz extraction.
//!
//! Small pencils go straight to the dense solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    dot, fix_sign, sym_eig, sym_generalized_eig, DenseMatrix, EigenPairs, SparseCholesky,
    SparseMatrix,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LowestModesOptions {
    /// Pencils of at most this order are solved densely.
    pub dense_threshold: usize,
    /// Relative residual `‖Ax − θMx‖ / ((‖A‖∞ + |θ|‖M‖∞)‖x‖)` to reach.
    pub tol: f64,
    pub max_iter: usize,
    /// Shift σ in `(A + σM)⁻¹M`; `None` picks `‖A‖∞ / ‖M‖∞ · 1e-3`.
    pub shift: Option<f64>,
    pub seed: u64,
}

impl Default for LowestModesOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 400,
            tol: 1e-10,
            max_iter: 400,
            shift: None,
            seed: 0x5eed,
        }
    }
}

/// The `k` smallest eigenpairs with `M`-orthonormal eigenvectors (columns),
/// ascending, largest-magnitude component positive.
pub fn lowest_generalized_modes(
    a: &SparseMatrix,
    m: &SparseMatrix,
    k: usize,
    opts: &LowestModesOptions,
) -> Result<EigenPairs> {
    let n = a.n_rows();
    if a.n_cols() != n || m.n_rows() != n || m.n_cols() != n {
        return Err(Error::input("lowest_generalized_modes: pencil dimensions disagree"));
    }
    if k > n {
        return Err(Error::input(format!(
            "requested {k} eigenpairs of a pencil of order {n}"
        )));
    }
    if k == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(n, 0),
        });
    }
    let block = (2 * k).max(k + 10);
    if n <= opts.dense_threshold || block >= n / 2 {
        let full = sym_generalized_eig(&a.to_dense(), &m.to_dense())?;
        return Ok(EigenPairs {
            values: full.values[..k].to_vec(),
            vectors: full.vectors.leading_columns(k),
        });
    }
    subspace_iteration(a, m, k, block, opts)
}

fn subspace_iteration(
    a: &SparseMatrix,
    m: &SparseMatrix,
    k: usize,
    block: usize,
    opts: &LowestModesOptions,
) -> Result<EigenPairs> {
    let n = a.n_rows();
    let a_norm = a.norm_inf();
    let m_norm = m.norm_inf();
    let sigma = opts.shift.unwrap_or(1e-3 * a_norm / m_norm).max(f64::MIN_POSITIVE);
    let shifted = a.add_scaled(1.0, m, sigma)?;
    let factor = SparseCholesky::factor(&shifted)
        .map_err(|e| Error::Pencil(format!("shifted pencil factorization failed: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(block);
    basis.push(vec![1.0; n]);
    while basis.len() < block {
        basis.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }

    let mut worst = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let mut y: Vec<Vec<f64>> = basis
            .iter()
            .map(|x| {
                let mut v = m.mul_vec(x);
                factor.solve_in_place(&mut v);
                v
            })
            .collect();
        m_orthonormalize(&mut y, m, &mut rng);

        let ay: Vec<Vec<f64>> = y.iter().map(|v| a.mul_vec(v)).collect();
        let p = y.len();
        let mut h = DenseMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..=i {
                let v = dot(&y[i], &ay[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h.symmetrize();
        let ritz = sym_eig(&h)?;
        let combine = |src: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (r, s) in src.iter().enumerate() {
                let c = ritz.vectors[(r, col)];
                if c != 0.0 {
                    out.iter_mut().zip(s).for_each(|(o, v)| *o += c * v);
                }
            }
            out
        };
        basis = (0..p).map(|j| combine(&y, j)).collect();

        worst = 0.0;
        for j in 0..k {
            let theta = ritz.values[j];
            let ax = combine(&ay, j);
            let mx = m.mul_vec(&basis[j]);
            let res: f64 = ax
                .iter()
                .zip(&mx)
                .map(|(u, v)| (u - theta * v).powi(2))
                .sum::<f64>()
                .sqrt();
            let xn = dot(&basis[j], &basis[j]).sqrt();
            worst = worst.max(res / ((a_norm + theta.abs() * m_norm) * xn));
        }
        if worst <= opts.tol {
            log::debug!("subspace iteration converged in {} sweeps (n = {n})", iter + 1);
            return Ok(finish(basis, &ritz.values, k, n));
        }
    }
    if worst <= opts.tol.sqrt() {
        log::warn!(
            "subspace iteration stopped at relative residual {worst:.2e} (target {:.0e})",
            opts.tol
        );
        // Recompute Ritz values for the final basis.
        let values: Vec<f64> = basis[..k]
            .iter()
            .map(|x| a.quadratic_form(x) / m.quadratic_form(x))
            .collect();
        return Ok(finish(basis, &values, k, n));
    }
    Err(Error::Solver {
        message: format!("subspace iteration did not converge in {} sweeps", opts.max_iter),
        residual: worst,
    })
}

fn finish(mut basis: Vec<Vec<f64>>, values: &[f64], k: usize, n: usize) -> EigenPairs {
    basis.truncate(k);
    let mut vectors = DenseMatrix::zeros(n, k);
    for (j, mut v) in basis.into_iter().enumerate() {
        fix_sign(&mut v);
        for (i, x) in v.into_iter().enumerate() {
            vectors[(i, j)] = x;
        }
    }
    EigenPairs {
        values: values[..k].to_vec(),
        vectors,
    }
}

/// Modified Gram–Schmidt in the `M` inner product, applied twice. Columns
/// that collapse are replaced by fresh random directions.
fn m_orthonormalize(vs: &mut [Vec<f64>], m: &SparseMatrix, rng: &mut ChaCha8Rng) {
    let n = m.n_rows();
    let mut mvs: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for j in 0..vs.len() {
        let mut attempts = 0;
        loop {
            let start_norm = m.quadratic_form(&vs[j]).max(0.0).sqrt();
            for _ in 0..2 {
                for (i, mvi) in mvs.iter().enumerate() {
                    let c = dot(mvi, &vs[j]);
                    let (head, tail) = vs.split_at_mut(j);
                    tail[0].iter_mut().zip(&head[i]).for_each(|(x, q)| *x -= c * q);
                }
            }
            let mv = m.mul_vec(&vs[j]);
            let norm = dot(&mv, &vs[j]).max(0.0).sqrt();
            if norm > 1e-10 * start_norm && norm > 0.0 {
                let inv = 1.0 / norm;
                vs[j].iter_mut().for_each(|x| *x *= inv);
                mvs.push(mv.into_iter().map(|x| x * inv).collect());
                break;
            }
            attempts += 1;
            assert!(attempts < 10, "unable to extend an M-orthonormal basis");
            vs[j] = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        }
    }
}

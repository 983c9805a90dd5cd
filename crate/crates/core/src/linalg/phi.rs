//! φ-functions of exponential integrators and their action through a
//! mass-orthonormal pencil eigendecomposition.

use std::sync::Arc;

use super::{DenseMatrix, SparseMatrix};
use crate::error::{Error, Result};

/// Below this magnitude φ₁ switches from `expm1(z)/z` to its Taylor series.
pub const PHI1_SERIES_THRESHOLD: f64 = 1e-5;

/// Below this magnitude φ₂ is evaluated by its Taylor series.
const PHI2_SERIES_THRESHOLD: f64 = 1.0;

/// `Σ_{k<terms} z^k / (k + shift)!` by Horner's rule.
fn phi_series(z: f64, shift: u32, terms: u32) -> f64 {
    // Horner on c_k = 1/(k+shift)!: c_{k}/c_{k+1} = k + shift + 1.
    let mut acc = 0.0;
    for k in (0..terms).rev() {
        acc = 1.0 + acc * z / f64::from(k + shift + 1);
    }
    // acc now equals shift! * Σ z^k / (k+shift)!
    let mut fact = 1.0;
    for j in 2..=shift {
        fact *= f64::from(j);
    }
    acc / fact
}

/// Scalar φ-function `φ_p(z)` for `p ∈ {0, 1, 2}` and `z ≤ 0`.
///
/// φ₀ = exp, φ_{p+1}(z) = (φ_p(z) − 1/p!) / z with the removable
/// singularity at zero filled by the Taylor series.
pub fn phi_scalar(p: u32, z: f64) -> Result<f64> {
    if !(z <= 0.0) {
        return Err(Error::input(format!("phi_scalar expects z <= 0, got {z}")));
    }
    match p {
        0 => Ok(z.exp()),
        1 => Ok(phi1(z)),
        2 => Ok(if z.abs() < PHI2_SERIES_THRESHOLD {
            phi_series(z, 2, 20)
        } else {
            (z.exp_m1() - z) / (z * z)
        }),
        _ => Err(Error::Unsupported(format!("phi_{p} (only p <= 2)"))),
    }
}

/// φ₁ without domain checks (hot path of the time loop).
#[inline]
pub fn phi1(z: f64) -> f64 {
    if z.abs() >= PHI1_SERIES_THRESHOLD {
        z.exp_m1() / z
    } else {
        phi_series(z, 1, 8)
    }
}

/// Eigendecomposition of a coarse pencil `−τ A₀ q = d M₀ q` with
/// `Q₀ᵀ M₀ Q₀ = I`, so that `φ(−τ M₀⁻¹ A₀) = Q₀ φ(D₀) Q₀ᵀ M₀`.
#[derive(Debug, Clone)]
pub struct EigenPencilDecomp {
    eigenvalues: Vec<f64>,
    eigenvectors: DenseMatrix,
    mass: Arc<SparseMatrix>,
    tau: f64,
}

impl EigenPencilDecomp {
    pub fn new(
        eigenvalues: Vec<f64>,
        eigenvectors: DenseMatrix,
        mass: Arc<SparseMatrix>,
        tau: f64,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.n_rows() != n || eigenvectors.n_cols() != n || mass.n_rows() != n {
            return Err(Error::input("pencil decomposition dimensions disagree"));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
            mass,
            tau,
        })
    }

    /// Diagonal of `D₀`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `Q₀`, eigenvectors as columns.
    pub fn eigenvectors(&self) -> &DenseMatrix {
        &self.eigenvectors
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The same decomposition for another step size. `D₀` is linear in τ
    /// while `Q₀` does not depend on it.
    pub fn with_tau(&self, tau: f64) -> Self {
        let scale = tau / self.tau;
        Self {
            eigenvalues: self.eigenvalues.iter().map(|d| d * scale).collect(),
            eigenvectors: self.eigenvectors.clone(),
            mass: Arc::clone(&self.mass),
            tau,
        }
    }

    /// `‖Q₀ᵀ M₀ Q₀ − I‖_max`
    pub fn orthonormality_defect(&self) -> f64 {
        let q = &self.eigenvectors;
        let n = self.dim();
        let mut worst: f64 = 0.0;
        let mq: Vec<Vec<f64>> = (0..n).map(|j| self.mass.mul_vec(&q.column(j))).collect();
        for i in 0..n {
            let qi = q.column(i);
            for (j, mqj) in mq.iter().enumerate() {
                let v: f64 = qi.iter().zip(mqj).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}

/// `Q₀ φ₁(D₀) Q₀ᵀ r`
pub fn apply_phi1_pencil(decomp: &EigenPencilDecomp, r: &[f64]) -> Result<Vec<f64>> {
    if r.len() != decomp.dim() {
        return Err(Error::input(format!(
            "apply_phi1_pencil: vector of length {} for a {}-dimensional pencil",
            r.len(),
            decomp.dim()
        )));
    }
    let mut y = decomp.eigenvectors.mul_transpose_vec(r);
    for (yj, &d) in y.iter_mut().zip(&decomp.eigenvalues) {
        *yj *= phi1(d);
    }
    Ok(decomp.eigenvectors.mul_vec(&y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_generalized_eig, DenseMatrix};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn taylor_oracle(z: f64, terms: usize) -> f64 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 0..terms {
            sum += term;
            term *= z / (k as f64 + 2.0);
        }
        sum
    }

    #[test]
    fn phi1_values() {
        assert_eq!(phi_scalar(1, 0.0).unwrap(), 1.0);
        let v = phi_scalar(1, -1.0).unwrap();
        assert!((v - 0.632_120_558_828_557_7).abs() < 1e-15);
        let z = -1e-8;
        let v = phi_scalar(1, z).unwrap();
        let oracle = taylor_oracle(z, 30);
        assert!(((v - oracle) / oracle).abs() < 1e-12);
        assert!((v - 0.999_999_995).abs() < 1e-12);
    }

    #[test]
    fn phi0_and_phi2() {
        assert_eq!(phi_scalar(0, 0.0).unwrap(), 1.0);
        assert!((phi_scalar(2, 0.0).unwrap() - 0.5).abs() < 1e-16);
        // Recurrence φ₂ = (φ₁ − 1)/z away from zero.
        for &z in &[-0.5, -2.0, -30.0] {
            let p1 = phi_scalar(1, z).unwrap();
            let p2 = phi_scalar(2, z).unwrap();
            assert!((p2 - (p1 - 1.0) / z).abs() < 1e-13 * p2.abs());
        }
    }

    #[test]
    fn domain_errors() {
        assert!(phi_scalar(1, 0.5).is_err());
        assert!(phi_scalar(3, -1.0).is_err());
    }

    #[test]
    fn branch_switch_is_continuous() {
        let t = PHI1_SERIES_THRESHOLD;
        let series = phi_series(-t, 1, 8);
        let direct = (-t).exp_m1() / -t;
        assert!(((series - direct) / direct).abs() < 1e-12);
    }

    #[test]
    fn zero_spectrum_orthogonal_q_is_identity_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 6;
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        a.symmetrize();
        let eig = crate::linalg::sym_eig(&a).unwrap();
        let d = EigenPencilDecomp::new(
            vec![0.0; n],
            eig.vectors,
            Arc::new(SparseMatrix::identity(n)),
            1.0,
        )
        .unwrap();
        let r: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let out = apply_phi1_pencil(&d, &r).unwrap();
        for (u, v) in out.iter().zip(&r) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn one_by_one_pencil() {
        // M₀ = 2, A₀ = 2, τ = 1 → q = 1/√2, d = −1.
        let q = DenseMatrix::from_diagonal(&[0.5f64.sqrt()]);
        let d = EigenPencilDecomp::new(
            vec![-1.0],
            q,
            Arc::new(SparseMatrix::from_diagonal(&[2.0])),
            1.0,
        )
        .unwrap();
        let out = apply_phi1_pencil(&d, &[3.0]).unwrap();
        let expect = (1.0 - (-1.0f64).exp()) / 2.0 * 3.0;
        assert!((out[0] - expect).abs() < 1e-15);
        assert!(apply_phi1_pencil(&d, &[1.0, 2.0]).is_err());
    }

    /// Dense oracle: φ₁(−τM⁻¹A) r computed from the eigen decomposition of
    /// the symmetric matrix S = M^{-1/2} A M^{-1/2}, with M^{-1/2} from a
    /// plain eigendecomposition of M.
    #[test]
    fn random_pencil_matches_dense_matrix_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20;
        let tau = 0.3;
        let mut b = DenseMatrix::zeros(n, n);
        let mut c = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = rng.gen_range(-1.0..1.0);
                c[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let a = b.transpose().matmul(&b);
        let mut m = c.transpose().matmul(&c);
        for i in 0..n {
            m[(i, i)] += n as f64;
        }
        let mut neg_tau_a = a.clone();
        neg_tau_a.values_mut().iter_mut().for_each(|v| *v *= -tau);
        let gen = sym_generalized_eig(&neg_tau_a, &m).unwrap();
        let mass = {
            let mut t = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    t.push((i, j, m[(i, j)]));
                }
            }
            Arc::new(crate::linalg::csr_from_triplets(&t, n, n, false).unwrap())
        };
        let decomp = EigenPencilDecomp::new(gen.values, gen.vectors, mass, tau).unwrap();
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = apply_phi1_pencil(&decomp, &r).unwrap();

        // Q φ₁(D) Qᵀ r = φ₁(−τ M⁻¹ A) M⁻¹ r.
        let me = crate::linalg::sym_eig(&m).unwrap();
        let mut m_inv_half = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let s = 1.0 / me.values[k].sqrt();
            for i in 0..n {
                for j in 0..n {
                    m_inv_half[(i, j)] += s * me.vectors[(i, k)] * me.vectors[(j, k)];
                }
            }
        }
        let mut s = m_inv_half.matmul(&a).matmul(&m_inv_half);
        s.symmetrize();
        let se = crate::linalg::sym_eig(&s).unwrap();
        // φ₁(−τ M⁻¹A) M⁻¹ = M^{-1/2} φ₁(−τ S) M^{-1/2}
        let y = m_inv_half.mul_vec(&r);
        let mut w = vec![0.0; n];
        for k in 0..n {
            let v = se.vectors.column(k);
            let coef: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()
                * taylor_or_direct(-tau * se.values[k]);
            for i in 0..n {
                w[i] += coef * v[i];
            }
        }
        let expect = m_inv_half.mul_vec(&w);
        let scale = expect.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in got.iter().zip(&expect) {
            assert!((u - v).abs() <= 1e-10 * scale, "{u} vs {v}");
        }
    }

    fn taylor_or_direct(z: f64) -> f64 {
        if z.abs() < 1.0 {
            taylor_oracle(z, 30)
        } else {
            (z.exp() - 1.0) / z
        }
    }

    proptest! {
        #[test]
        fn phi1_pencil_action_is_linear(
            r1 in prop::collection::vec(-1.0f64..1.0, 4),
            r2 in prop::collection::vec(-1.0f64..1.0, 4),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let q = DenseMatrix::from_row_major(4, 4, vec![
                0.5, 0.5, 0.5, 0.5,
                0.5, -0.5, 0.5, -0.5,
                0.5, 0.5, -0.5, -0.5,
                0.5, -0.5, -0.5, 0.5,
            ]).unwrap();
            let d = EigenPencilDecomp::new(
                vec![-4.0, -1.0, -1e-7, 0.0], q, Arc::new(SparseMatrix::identity(4)), 1.0,
            ).unwrap();
            let combo: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = apply_phi1_pencil(&d, &combo).unwrap();
            let f1 = apply_phi1_pencil(&d, &r1).unwrap();
            let f2 = apply_phi1_pencil(&d, &r2).unwrap();
            let scale = lhs.iter().chain(&f1).chain(&f2).fold(1e-300f64, |m, v| m.max(v.abs()));
            for i in 0..4 {
                prop_assert!((lhs[i] - (alpha * f1[i] + beta * f2[i])).abs() <= 1e-12 * scale * (1.0 + alpha.abs() + beta.abs()));
            }
        }
    }
}

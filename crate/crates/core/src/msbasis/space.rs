use super::{LocalEigenBasis, ShapeValues};
use crate::coarsening::Neighborhoods;
use crate::error::{Error, Result};
use crate::fem::{FineMesh, NodalKind, NodalVector};
use crate::linalg::{csr_from_triplets, DenseCholesky, SparseMatrix};

/// Coarse space spanned by the products `W_i ψ_k`, stored as the rows of
/// `R₀` over interior fine DOFs.
#[derive(Debug, Clone)]
pub struct MultiscaleSpace {
    r0: SparseMatrix,
    /// `(neighborhood, mode)` of each row of `R₀`.
    labels: Vec<(usize, usize)>,
    n_b: usize,
}

impl MultiscaleSpace {
    /// Wrap an explicit projection matrix; every row is labelled `(row, 0)`.
    pub fn from_projection(r0: SparseMatrix) -> Self {
        let labels = (0..r0.n_rows()).map(|r| (r, 0)).collect();
        Self { r0, labels, n_b: 1 }
    }

    pub fn r0(&self) -> &SparseMatrix {
        &self.r0
    }

    pub fn labels(&self) -> &[(usize, usize)] {
        &self.labels
    }

    /// Coarse dimension `N_c`.
    pub fn dim(&self) -> usize {
        self.r0.n_rows()
    }

    pub fn n_fine(&self) -> usize {
        self.r0.n_cols()
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    /// Rows of the modes `k < n_b`; the result is the space built with
    /// `n_b` retained modes per neighborhood.
    pub fn truncated(&self, n_b: usize) -> Result<(Self, Vec<usize>)> {
        if n_b > self.n_b {
            return Err(Error::input(format!(
                "space has {} modes per neighborhood, asked for {n_b}",
                self.n_b
            )));
        }
        let rows: Vec<usize> = (0..self.labels.len()).filter(|&r| self.labels[r].1 < n_b).collect();
        Ok((
            Self {
                r0: self.r0.select_rows(&rows),
                labels: rows.iter().map(|&r| self.labels[r]).collect(),
                n_b,
            },
            rows,
        ))
    }

    /// `R₀ᵀ c` as a reduced nodal vector.
    pub fn prolongate(&self, mesh: &FineMesh, coarse: &[f64]) -> Result<NodalVector> {
        if coarse.len() != self.dim() {
            return Err(Error::input(format!(
                "prolongate: coarse vector of length {} for dimension {}",
                coarse.len(),
                self.dim()
            )));
        }
        NodalVector::reduced(mesh, self.r0.mul_transpose_vec(coarse))
    }

    /// `R₀ f` for a reduced nodal vector.
    pub fn restrict(&self, fine: &NodalVector) -> Result<Vec<f64>> {
        if fine.kind() != NodalKind::Reduced || fine.len() != self.n_fine() {
            return Err(Error::input("restrict expects a reduced nodal vector"));
        }
        Ok(self.r0.mul_vec(fine.values()))
    }
}

/// Stack the nodal values of `W_i ψ_k` (interior DOFs only) into `R₀`,
/// dropping rows whose interior trace vanishes.
pub fn build_multiscale_space(
    bases: &[LocalEigenBasis],
    shapes: &ShapeValues,
    neighborhoods: &Neighborhoods,
    mesh: &FineMesh,
) -> Result<MultiscaleSpace> {
    if bases.len() != neighborhoods.len() || shapes.values.len() != neighborhoods.len() {
        return Err(Error::input("bases, shapes and neighborhoods disagree in count"));
    }
    let n_b = bases.iter().map(|b| b.n_b).min().unwrap_or(0);
    if bases.iter().any(|b| b.n_b != n_b) {
        return Err(Error::input("local bases retain different numbers of modes"));
    }
    let mut triplets = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = Vec::new();
    for (i, ((basis, w), e)) in bases.iter().zip(&shapes.values).zip(&neighborhoods.entries).enumerate() {
        if basis.eigenvectors.n_rows() != e.nodes.len() {
            return Err(Error::input(format!("basis {i} does not match its neighborhood")));
        }
        for k in 0..n_b {
            let row = labels.len();
            let mut any = false;
            for (&local, &dof) in e.interior_local.iter().zip(&e.interior_dofs) {
                let v = w[local] * basis.eigenvectors[(local, k)];
                if v != 0.0 {
                    triplets.push((row, dof, v));
                    any = true;
                }
            }
            if any {
                labels.push((i, k));
            } else {
                dropped.push((i, k));
            }
        }
    }
    if !dropped.is_empty() {
        log::info!("dropped {} basis functions with empty interior trace: {dropped:?}", dropped.len());
    }
    let r0 = csr_from_triplets(&triplets, labels.len(), mesh.n_interior(), false)?;
    Ok(MultiscaleSpace { r0, labels, n_b })
}

/// `(R₀ M R₀ᵀ, R₀ A R₀ᵀ)`, symmetrized. Fails with a space error when the
/// coarse mass matrix is not positive definite.
pub fn coarse_matrices(
    space: &MultiscaleSpace,
    m: &SparseMatrix,
    a: &SparseMatrix,
) -> Result<(SparseMatrix, SparseMatrix)> {
    let n = space.n_fine();
    for (name, x) in [("mass", m), ("stiffness", a)] {
        if x.n_rows() != n || x.n_cols() != n {
            return Err(Error::input(format!(
                "{name} matrix is {}x{}, projection has {n} fine columns",
                x.n_rows(),
                x.n_cols()
            )));
        }
    }
    let sym = |x: SparseMatrix| -> Result<SparseMatrix> { x.add_scaled(0.5, &x.transpose(), 0.5) };
    let m0 = sym(space.r0.galerkin_product(m)?)?;
    let a0 = sym(space.r0.galerkin_product(a)?)?;
    if let Err(e) = DenseCholesky::factor(&m0.to_dense()) {
        let weak: Vec<(usize, usize)> = m0
            .diagonal()
            .iter()
            .enumerate()
            .filter(|(_, &d)| !(d > 1e-14))
            .map(|(r, _)| space.labels[r])
            .collect();
        return Err(Error::Space(format!(
            "coarse mass matrix is not positive definite ({e}); rows with vanishing diagonal: {weak:?}"
        )));
    }
    Ok((m0, a0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_structured_mesh;
    use crate::linalg::DenseMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rows: usize, cols: usize, density: f64, seed: u64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for r in 0..rows {
            t.push((r, rng.gen_range(0..cols), 1.0 + rng.gen::<f64>()));
            for c in 0..cols {
                if rng.gen_bool(density) {
                    t.push((r, c, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        csr_from_triplets(&t, rows, cols, false).unwrap()
    }

    fn spd(n: usize, seed: u64) -> SparseMatrix {
        let b = random_sparse(n, n, 0.2, seed).to_dense();
        let mut a = b.transpose().matmul(&b);
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push((i, j, a[(i, j)]));
            }
        }
        csr_from_triplets(&t, n, n, false).unwrap()
    }

    #[test]
    fn identity_projection_reproduces_matrices() {
        let m = spd(8, 1);
        let a = spd(8, 2);
        let space = MultiscaleSpace::from_projection(SparseMatrix::identity(8));
        let (m0, a0) = coarse_matrices(&space, &m, &a).unwrap();
        assert!(m0.to_dense().sub(&m.to_dense()).max_abs() < 1e-14);
        assert!(a0.to_dense().sub(&a.to_dense()).max_abs() < 1e-14);
    }

    #[test]
    fn single_row_is_quadratic_form() {
        let m = spd(6, 3);
        let v = [1.0, -2.0, 0.0, 0.5, 3.0, -1.0];
        let r = csr_from_triplets(
            &v.iter().enumerate().map(|(c, &x)| (0, c, x)).collect::<Vec<_>>(),
            1,
            6,
            false,
        )
        .unwrap();
        let (m0, _) = coarse_matrices(&MultiscaleSpace::from_projection(r), &m, &m).unwrap();
        assert!((m0.get(0, 0) - m.quadratic_form(&v)).abs() < 1e-12);
    }

    #[test]
    fn triple_product_matches_dense() {
        let m = spd(40, 4);
        let r = random_sparse(7, 40, 0.1, 5);
        let (m0, _) = coarse_matrices(&MultiscaleSpace::from_projection(r.clone()), &m, &m).unwrap();
        let rd = r.to_dense();
        let dense: DenseMatrix = rd.matmul(&m.to_dense()).matmul(&rd.transpose());
        let scale = dense.max_abs();
        assert!(m0.to_dense().sub(&dense).max_abs() <= 1e-10 * scale);
        assert_eq!(m0.asymmetry(), 0.0);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let m = spd(5, 6);
        let r = csr_from_triplets(&[(0, 1, 1.0), (1, 1, 2.0)], 2, 5, false).unwrap();
        assert!(matches!(
            coarse_matrices(&MultiscaleSpace::from_projection(r), &m, &m),
            Err(Error::Space(_))
        ));
        let bad = SparseMatrix::identity(4);
        assert!(coarse_matrices(&MultiscaleSpace::from_projection(SparseMatrix::identity(5)), &bad, &m).is_err());
    }

    #[test]
    fn restrict_after_prolongate_is_gram_action() {
        let mesh = build_structured_mesh(5, 5).unwrap();
        let r = random_sparse(4, mesh.n_interior(), 0.3, 7);
        let space = MultiscaleSpace::from_projection(r.clone());
        let c = vec![1.0, -0.5, 2.0, 0.25];
        let back = space.restrict(&space.prolongate(&mesh, &c).unwrap()).unwrap();
        let rd = r.to_dense();
        let gram = rd.matmul(&rd.transpose());
        let expect = gram.mul_vec(&c);
        for (u, v) in back.iter().zip(&expect) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(space.prolongate(&mesh, &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn restrict_is_adjoint_of_prolongate(seed in 0u64..500) {
            let mesh = build_structured_mesh(4, 4).unwrap();
            let r = random_sparse(3, mesh.n_interior(), 0.4, seed);
            let space = MultiscaleSpace::from_projection(r);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let u = NodalVector::reduced(&mesh, (0..mesh.n_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs: f64 = space.restrict(&u).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum();
            let pc = space.prolongate(&mesh, &c).unwrap();
            let rhs: f64 = u.values().iter().zip(pc.values()).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}

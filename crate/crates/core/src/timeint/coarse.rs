use std::sync::Arc;
use std::time::Instant;

use super::{check_square, reduced_values, Recorder, RunOptions, SolveResult, SolveStats, Source, TimeGrid};
use crate::error::{Error, Result};
use crate::fem::{NodalKind, NodalVector};
use crate::linalg::{apply_phi1_pencil, sym_generalized_eig, DenseCholesky, EigenPencilDecomp, SparseMatrix};
use crate::msbasis::{coarse_matrices, MultiscaleSpace};

/// Coarse Galerkin system `(M₀, A₀)` of a multiscale space together with a
/// factorization of `M₀`.
#[derive(Debug, Clone)]
pub struct CoarseOperator {
    space: MultiscaleSpace,
    m0: Arc<SparseMatrix>,
    a0: SparseMatrix,
    m0_factor: DenseCholesky,
}

impl CoarseOperator {
    pub fn new(space: MultiscaleSpace, m: &SparseMatrix, a: &SparseMatrix) -> Result<Self> {
        let (m0, a0) = coarse_matrices(&space, m, a)?;
        Self::from_parts(space, m0, a0)
    }

    /// Use precomputed coarse matrices, e.g. principal submatrices of a
    /// larger space.
    pub fn from_parts(space: MultiscaleSpace, m0: SparseMatrix, a0: SparseMatrix) -> Result<Self> {
        let n = space.dim();
        check_square("coarse mass matrix", &m0, n)?;
        check_square("coarse stiffness matrix", &a0, n)?;
        let m0_factor = DenseCholesky::factor(&m0.to_dense())
            .map_err(|e| Error::Space(format!("coarse mass matrix is not positive definite ({e})")))?;
        Ok(Self {
            space,
            m0: Arc::new(m0),
            a0,
            m0_factor,
        })
    }

    pub fn space(&self) -> &MultiscaleSpace {
        &self.space
    }

    pub fn m0(&self) -> &SparseMatrix {
        &self.m0
    }

    pub fn a0(&self) -> &SparseMatrix {
        &self.a0
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Coarse coordinates `M₀⁻¹ R₀ M p` of the `M`-orthogonal projection.
    pub fn project_coords(&self, m: &SparseMatrix, p: &[f64]) -> Result<Vec<f64>> {
        let n = self.space.n_fine();
        check_square("mass matrix", m, n)?;
        if p.len() != n {
            return Err(Error::input(format!("projection of a vector of length {} (expected {n})", p.len())));
        }
        Ok(self.m0_factor.solve(&self.space.r0().mul_vec(&m.mul_vec(p))))
    }

    /// Decomposition of `−τA₀ q = d M₀ q`.
    pub fn pencil(&self, tau: f64) -> Result<EigenPencilDecomp> {
        pencil_with_mass(Arc::clone(&self.m0), &self.a0, tau)
    }

    /// Backward Euler in coarse coordinates:
    /// `(M₀ + τA₀) cⁿ = M₀ cⁿ⁻¹ + τ R₀ b(R₀ᵀ c̃)`.
    pub fn fd_run(
        &self,
        m: &SparseMatrix,
        a: &SparseMatrix,
        source: Source,
        p0: &NodalVector,
        grid: &TimeGrid,
        opts: &RunOptions,
    ) -> Result<SolveResult> {
        let start = Instant::now();
        let n = self.space.n_fine();
        check_square("stiffness matrix", a, n)?;
        opts.validate(grid)?;
        let mut c = self.project_coords(m, reduced_values(p0, n)?)?;
        let tau = grid.tau;
        let k = DenseCholesky::factor(&self.m0.add_scaled(1.0, &self.a0, tau)?.to_dense())
            .map_err(|e| e.context("factoring M₀ + τA₀"))?;
        let r0 = self.space.r0();
        let mut rec = Recorder::new(&opts.snapshots);
        for step in 1..=grid.n_steps {
            let mc = self.m0.mul_vec(&c);
            let mut iterate = c.clone();
            let sweeps = if source.is_zero() { 1 } else { opts.picard };
            for _ in 0..sweeps {
                let mut rhs = mc.clone();
                if let Some(b) = source.load(m, &r0.mul_transpose_vec(&iterate)) {
                    for (x, bi) in rhs.iter_mut().zip(r0.mul_vec(&b)) {
                        *x += tau * bi;
                    }
                }
                iterate = k.solve(&rhs);
            }
            c = iterate;
            check_finite(step, &c)?;
            rec.record(step, || r0.mul_transpose_vec(&c));
        }
        Ok(self.finish(c, rec, grid, start, 2))
    }

    /// Exponential Euler: with `p = R₀ᵀ c`, `r = b(p) − A p`,
    /// `c ← c + τ Q₀ φ₁(D₀) Q₀ᵀ R₀ r`. A decomposition for another step size
    /// is rescaled.
    #[allow(clippy::too_many_arguments)]
    pub fn ei_run(
        &self,
        decomp: &EigenPencilDecomp,
        m: &SparseMatrix,
        a: &SparseMatrix,
        source: Source,
        p0: &NodalVector,
        grid: &TimeGrid,
        opts: &RunOptions,
    ) -> Result<SolveResult> {
        let start = Instant::now();
        let n = self.space.n_fine();
        check_square("stiffness matrix", a, n)?;
        opts.validate(grid)?;
        if decomp.dim() != self.dim() {
            return Err(Error::input(format!(
                "pencil of dimension {} for a coarse space of dimension {}",
                decomp.dim(),
                self.dim()
            )));
        }
        let rescaled;
        let decomp = if decomp.tau() == grid.tau {
            decomp
        } else {
            rescaled = decomp.with_tau(grid.tau);
            &rescaled
        };
        let mut c = self.project_coords(m, reduced_values(p0, n)?)?;
        let tau = grid.tau;
        let r0 = self.space.r0();
        let mut rec = Recorder::new(&opts.snapshots);
        for step in 1..=grid.n_steps {
            let p = r0.mul_transpose_vec(&c);
            let mut r = a.mul_vec(&p);
            r.iter_mut().for_each(|x| *x = -*x);
            if let Some(b) = source.load(m, &p) {
                r.iter_mut().zip(b).for_each(|(x, bi)| *x += bi);
            }
            let delta = apply_phi1_pencil(decomp, &r0.mul_vec(&r))?;
            c.iter_mut().zip(delta).for_each(|(ci, d)| *ci += tau * d);
            check_finite(step, &c)?;
            rec.record(step, || r0.mul_transpose_vec(&c));
        }
        Ok(self.finish(c, rec, grid, start, 0))
    }

    fn finish(&self, c: Vec<f64>, rec: Recorder<'_>, grid: &TimeGrid, start: Instant, factorizations: usize) -> SolveResult {
        SolveResult {
            final_state: self.space.r0().mul_transpose_vec(&c),
            coarse_final: Some(c),
            snapshots: rec.finish(),
            stats: SolveStats {
                steps: grid.n_steps,
                wall_time: start.elapsed(),
                dim: self.dim(),
                factorizations,
            },
        }
    }
}

fn check_finite(step: usize, c: &[f64]) -> Result<()> {
    if c.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Step {
            step,
            source: Box::new(Error::Solver {
                message: "non-finite coarse state".into(),
                residual: f64::NAN,
            }),
        })
    }
}

fn pencil_with_mass(m0: Arc<SparseMatrix>, a0: &SparseMatrix, tau: f64) -> Result<EigenPencilDecomp> {
    if !(tau > 0.0) {
        return Err(Error::input(format!("pencil step size must be positive, got {tau}")));
    }
    let n = m0.n_rows();
    check_square("coarse stiffness matrix", a0, n)?;
    let pairs = sym_generalized_eig(&a0.to_dense(), &m0.to_dense())?;
    // d = −τλ, ascending.
    let order: Vec<usize> = (0..n).rev().collect();
    let values = order.iter().map(|&j| -tau * pairs.values[j]).collect();
    let mut q = crate::linalg::DenseMatrix::zeros(n, n);
    for i in 0..n {
        let src = pairs.vectors.row(i);
        let dst = q.row_mut(i);
        for (d, &j) in dst.iter_mut().zip(&order) {
            *d = src[j];
        }
    }
    EigenPencilDecomp::new(values, q, m0, tau)
}

/// Decomposition of `−τA₀ q = d M₀ q` with `Q₀ᵀ M₀ Q₀ = I` and `D₀`
/// ascending.
pub fn coarse_pencil_eig(m0: &SparseMatrix, a0: &SparseMatrix, tau: f64) -> Result<EigenPencilDecomp> {
    pencil_with_mass(Arc::new(m0.clone()), a0, tau)
}

/// `p̂₀ = R₀ᵀ M₀⁻¹ R₀ M p₀`.
pub fn project_initial(
    space: &MultiscaleSpace,
    m: &SparseMatrix,
    m0: &SparseMatrix,
    p0: &NodalVector,
) -> Result<NodalVector> {
    let n = space.n_fine();
    check_square("mass matrix", m, n)?;
    check_square("coarse mass matrix", m0, space.dim())?;
    let p = reduced_values(p0, n)?;
    let chol = DenseCholesky::factor(&m0.to_dense()).map_err(|e| e.context("coarse mass solve"))?;
    let c = chol.solve(&space.r0().mul_vec(&m.mul_vec(p)));
    Ok(NodalVector::from_parts(NodalKind::Reduced, space.r0().mul_transpose_vec(&c)))
}

pub fn mfgmsfem_fd_run(
    space: &MultiscaleSpace,
    m: &SparseMatrix,
    a: &SparseMatrix,
    source: Source,
    p0: &NodalVector,
    grid: &TimeGrid,
    opts: &RunOptions,
) -> Result<SolveResult> {
    CoarseOperator::new(space.clone(), m, a)?.fd_run(m, a, source, p0, grid, opts)
}

pub fn mfgmsfem_ei_run(
    space: &MultiscaleSpace,
    m: &SparseMatrix,
    a: &SparseMatrix,
    source: Source,
    p0: &NodalVector,
    grid: &TimeGrid,
    opts: &RunOptions,
) -> Result<SolveResult> {
    let op = CoarseOperator::new(space.clone(), m, a)?;
    let decomp = op.pencil(grid.tau)?;
    op.ei_run(&decomp, m, a, source, p0, grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_mass, assemble_stiffness, build_structured_mesh, FineMesh, MassWeight, PermeabilityField};
    use crate::linalg::{csr_from_triplets, DenseMatrix};
    use crate::timeint::fine_backward_euler;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(nx: usize) -> (FineMesh, SparseMatrix, SparseMatrix) {
        let mesh = build_structured_mesh(nx, nx).unwrap();
        let kappa = PermeabilityField::new(
            (0..mesh.n_triangles())
                .map(|t| if mesh.square_of(t).1 == nx / 2 { 1e3 } else { 1.0 })
                .collect(),
        )
        .unwrap();
        let idx = mesh.interior_nodes().to_vec();
        let m = assemble_mass(&mesh, MassWeight::Unit).unwrap().principal_submatrix(&idx);
        let a = assemble_stiffness(&mesh, &kappa).unwrap().principal_submatrix(&idx);
        (mesh, m, a)
    }

    /// Random sparse full-rank projection with `rows` rows.
    fn random_space(rows: usize, cols: usize, seed: u64) -> MultiscaleSpace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for r in 0..rows {
            t.push((r, r * cols / rows, 1.0));
            for c in 0..cols {
                if rng.gen_bool(0.2) {
                    t.push((r, c, rng.gen_range(0.0..1.0)));
                }
            }
        }
        MultiscaleSpace::from_projection(csr_from_triplets(&t, rows, cols, false).unwrap())
    }

    fn p0(mesh: &FineMesh) -> NodalVector {
        NodalVector::from_fn(mesh, |x, y| x * (1.0 - x) * y * (1.0 - y)).to_reduced(mesh)
    }

    fn scalar(v: f64) -> SparseMatrix {
        csr_from_triplets(&[(0, 0, v)], 1, 1, false).unwrap()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn identity_space_fd_matches_fine() {
        let (mesh, m, a) = system(6);
        let space = MultiscaleSpace::from_projection(SparseMatrix::identity(m.n_rows()));
        let g = TimeGrid::new(0.1, 8).unwrap();
        let opts = RunOptions { picard: 1, snapshots: (1..=8).collect() };
        let p = p0(&mesh);
        for source in [Source::Zero, Source::Cubic] {
            let fine = fine_backward_euler(&m, &a, source, &p, &g, &opts).unwrap();
            let fd = mfgmsfem_fd_run(&space, &m, &a, source, &p, &g, &opts).unwrap();
            for ((_, x), (_, y)) in fine.snapshots.iter().zip(&fd.snapshots) {
                let d = x.iter().zip(y).fold(0.0f64, |w, (u, v)| w.max((u - v).abs()));
                assert!(d < 1e-12, "{d}");
            }
        }
    }

    #[test]
    fn scalar_fd_and_ei_closed_forms() {
        let mesh = build_structured_mesh(2, 2).unwrap();
        let space = MultiscaleSpace::from_projection(SparseMatrix::identity(1));
        let p = NodalVector::reduced(&mesh, vec![1.5]).unwrap();
        let g = TimeGrid::new(0.3, 6).unwrap();
        let (m, a) = (scalar(2.0), scalar(3.0));
        let fd = mfgmsfem_fd_run(&space, &m, &a, Source::Zero, &p, &g, &RunOptions::default()).unwrap();
        assert!((fd.final_state[0] - 1.5 / (1.0 + g.tau * 1.5).powi(6)).abs() < 1e-12);
        let ei = mfgmsfem_ei_run(&space, &m, &a, Source::Zero, &p, &g, &RunOptions::default()).unwrap();
        assert!((ei.final_state[0] - 1.5 * (-1.5 * g.t_max).exp()).abs() < 1e-12);
    }

    #[test]
    fn ei_semigroup_exactness() {
        let (mesh, m, a) = system(8);
        let space = random_space(10, m.n_rows(), 3);
        let op = CoarseOperator::new(space, &m, &a).unwrap();
        let decomp = op.pencil(1e-4).unwrap();
        // Horizon of a few slowest decay times so the state stays O(1).
        let t = 2.0 / -decomp.eigenvalues().last().unwrap() * 1e-4;
        let p = p0(&mesh);
        let opts = RunOptions::default();
        let one = op.ei_run(&decomp, &m, &a, Source::Zero, &p, &TimeGrid::new(t, 1).unwrap(), &opts).unwrap();
        let many = op.ei_run(&decomp, &m, &a, Source::Zero, &p, &TimeGrid::new(t, 50).unwrap(), &opts).unwrap();
        assert!(one.coarse_final.as_ref().unwrap().iter().any(|v| v.abs() > 1e-3));
        let d = rel(many.coarse_final.as_ref().unwrap(), one.coarse_final.as_ref().unwrap());
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn ei_step_is_affine() {
        let (mesh, m, a) = system(6);
        let space = random_space(6, m.n_rows(), 4);
        let op = CoarseOperator::new(space, &m, &a).unwrap();
        let decomp = op.pencil(1e-3).unwrap();
        let g = TimeGrid::new(1e-3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut draw = || NodalVector::reduced(&mesh, (0..m.n_rows()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let (u, v) = (draw(), draw());
        let (s, t) = (0.3, -1.7);
        let w = NodalVector::reduced(
            &mesh,
            u.values().iter().zip(v.values()).map(|(x, y)| s * x + t * y).collect(),
        )
        .unwrap();
        let run = |p: &NodalVector| op.ei_run(&decomp, &m, &a, Source::Zero, p, &g, &RunOptions::default()).unwrap().final_state;
        let (ru, rv, rw) = (run(&u), run(&v), run(&w));
        let combo: Vec<f64> = ru.iter().zip(&rv).map(|(x, y)| s * x + t * y).collect();
        assert!(rel(&rw, &combo) < 1e-10);
    }

    #[test]
    fn fd_and_ei_agree_for_small_steps() {
        let mesh = build_structured_mesh(12, 12).unwrap();
        let idx = mesh.interior_nodes().to_vec();
        let m = assemble_mass(&mesh, MassWeight::Unit).unwrap().principal_submatrix(&idx);
        let kappa = PermeabilityField::uniform(&mesh, 1.0).unwrap();
        let a = assemble_stiffness(&mesh, &kappa).unwrap().principal_submatrix(&idx);
        // Ten smooth Dirichlet modes as the coarse basis.
        let pi = std::f64::consts::PI;
        let mut t = Vec::new();
        for k in 0..10 {
            let (kx, ky) = ((k % 5 + 1) as f64, (k / 5 + 1) as f64);
            for (c, &v) in idx.iter().enumerate() {
                let [x, y] = mesh.vertices()[v];
                t.push((k, c, (kx * pi * x).sin() * (ky * pi * y).sin()));
            }
        }
        let space = MultiscaleSpace::from_projection(csr_from_triplets(&t, 10, idx.len(), false).unwrap());
        let op = CoarseOperator::new(space, &m, &a).unwrap();
        let g = TimeGrid::new(0.02, 10_000).unwrap();
        let p = NodalVector::from_fn(&mesh, |x, y| x * (1.0 - x) * y * (1.0 - y) * (1.0 + x)).to_reduced(&mesh);
        let opts = RunOptions::default();
        let fd = op.fd_run(&m, &a, Source::Zero, &p, &g, &opts).unwrap();
        let ei = op.ei_run(&op.pencil(g.tau).unwrap(), &m, &a, Source::Zero, &p, &g, &opts).unwrap();
        let d = rel(fd.coarse_final.as_ref().unwrap(), ei.coarse_final.as_ref().unwrap());
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn pencil_contract() {
        let m0 = SparseMatrix::identity(3);
        let a0 = SparseMatrix::from_diagonal(&[4.0, 1.0, 2.0]);
        let d = coarse_pencil_eig(&m0, &a0, 0.5).unwrap();
        assert_eq!(d.eigenvalues(), &[-2.0, -1.0, -0.5]);
        let q = d.eigenvectors();
        for (col, row) in [(0, 0), (1, 2), (2, 1)] {
            assert!((q[(row, col)].abs() - 1.0).abs() < 1e-14);
        }

        let (_, m, a) = system(6);
        let space = random_space(12, m.n_rows(), 7);
        let (m0, a0) = coarse_matrices(&space, &m, &a).unwrap();
        let tau = 0.02;
        let d = coarse_pencil_eig(&m0, &a0, tau).unwrap();
        assert!(d.orthonormality_defect() < 1e-10);
        assert!(d.eigenvalues().iter().all(|&x| x <= 1e-12));
        let q = d.eigenvectors();
        let lhs = a0.to_dense().matmul(q);
        let rhs = m0.to_dense().matmul(q).matmul(&DenseMatrix::from_diagonal(d.eigenvalues()));
        let mut defect = 0.0;
        for i in 0..q.n_rows() {
            for j in 0..q.n_cols() {
                defect += (-tau * lhs[(i, j)] - rhs[(i, j)]).powi(2);
            }
        }
        assert!(defect.sqrt() <= 1e-8 * tau * a0.norm_frobenius());
        let rescaled = d.with_tau(0.04);
        for (x, y) in rescaled.eigenvalues().iter().zip(d.eigenvalues()) {
            assert!((x - 2.0 * y).abs() <= 1e-15 * y.abs());
        }
    }

    #[test]
    fn projection_properties() {
        let (mesh, m, a) = system(8);
        let space = random_space(9, m.n_rows(), 8);
        let (m0, _) = coarse_matrices(&space, &m, &a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = NodalVector::reduced(&mesh, (0..m.n_rows()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let hat = project_initial(&space, &m, &m0, &p).unwrap();
        let again = project_initial(&space, &m, &m0, &hat).unwrap();
        assert!(rel(again.values(), hat.values()) < 1e-10);

        let diff: Vec<f64> = p.values().iter().zip(hat.values()).map(|(x, y)| x - y).collect();
        let resid = space.r0().mul_vec(&m.mul_vec(&diff));
        let scale = m.mul_vec(p.values()).iter().fold(0.0f64, |w, v| w.max(v.abs()));
        assert!(resid.iter().all(|r| r.abs() <= 1e-9 * scale));

        // Dense oracle.
        let r = space.r0().to_dense();
        let md = m.to_dense();
        let g = r.matmul(&md).matmul(&r.transpose());
        let rhs = r.mul_vec(&md.mul_vec(p.values()));
        let c = DenseCholesky::factor(&g).unwrap().solve(&rhs);
        let oracle = r.mul_transpose_vec(&c);
        assert!(rel(hat.values(), &oracle) < 1e-9);

        // Range of prolongation and the zero vector are fixed.
        let in_range = NodalVector::reduced(&mesh, space.r0().mul_transpose_vec(&[1.0, 0.0, 2.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.5])).unwrap();
        let back = project_initial(&space, &m, &m0, &in_range).unwrap();
        assert!(rel(back.values(), in_range.values()) < 1e-10);
        let zero = NodalVector::zeros(&mesh, NodalKind::Reduced);
        assert!(project_initial(&space, &m, &m0, &zero).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_coarse_dof_fd_closed_form() {
        let (mesh, m, a) = system(6);
        let v: Vec<f64> = p0(&mesh).values().to_vec();
        let r = csr_from_triplets(&v.iter().enumerate().map(|(c, &x)| (0, c, x)).collect::<Vec<_>>(), 1, v.len(), false).unwrap();
        let space = MultiscaleSpace::from_projection(r);
        let m00 = m.quadratic_form(&v);
        let a00 = a.quadratic_form(&v);
        let g = TimeGrid::new(0.1, 5).unwrap();
        let fd = mfgmsfem_fd_run(&space, &m, &a, Source::Zero, &p0(&mesh), &g, &RunOptions::default()).unwrap();
        // p0 lies in the span, so c⁰ = 1.
        let expect = (m00 / (m00 + g.tau * a00)).powi(5);
        assert!((fd.coarse_final.unwrap()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_data_stays_zero_with_cubic_source() {
        let (mesh, m, a) = system(6);
        let space = random_space(5, m.n_rows(), 10);
        let zero = NodalVector::zeros(&mesh, NodalKind::Reduced);
        let g = TimeGrid::new(0.2, 10).unwrap();
        let opts = RunOptions { picard: 2, snapshots: vec![] };
        let fd = mfgmsfem_fd_run(&space, &m, &a, Source::Cubic, &zero, &g, &opts).unwrap();
        let ei = mfgmsfem_ei_run(&space, &m, &a, Source::Cubic, &zero, &g, &opts).unwrap();
        assert!(fd.final_state.iter().chain(&ei.final_state).all(|&v| v == 0.0));
    }
}

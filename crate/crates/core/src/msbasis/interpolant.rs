use serde::Serialize;

use super::{LocalEigenBasis, ShapeValues};
use crate::coarsening::Neighborhoods;
use crate::error::{Error, Result};
use crate::fem::{assemble_on_cells, FineMesh, NodalKind, NodalVector, PermeabilityField};
use crate::linalg::dot;

/// Eigenvalues at or below this make the truncation bound vacuous.
pub const VACUOUS_EIGENVALUE: f64 = 1e-12;
/// Absolute slack on the truncation inequality.
pub const TRUNCATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct NeighborhoodTruncation {
    pub id: usize,
    /// `∫_{S_i} κ |u − I^{S_i} u|²`.
    pub residual_mass: f64,
    /// `∫_{S_i} κ |∇u|²`.
    pub energy: f64,
    /// `λ_{n_b+1}`; `None` when the neighborhood has too few DOFs for it.
    pub next_eigenvalue: Option<f64>,
    /// `None` when the bound is vacuous.
    pub holds: Option<bool>,
}

impl NeighborhoodTruncation {
    pub fn bound(&self) -> Option<f64> {
        match self.next_eigenvalue {
            Some(l) if l > VACUOUS_EIGENVALUE => Some(self.energy / l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InterpolantReport {
    /// `I₀ u = Σ_i W_i I^{S_i} u` at every mesh vertex.
    pub interpolant: NodalVector,
    pub neighborhoods: Vec<NeighborhoodTruncation>,
}

impl InterpolantReport {
    /// True when every non-vacuous neighborhood satisfies the bound.
    pub fn all_hold(&self) -> bool {
        self.neighborhoods.iter().all(|n| n.holds != Some(false))
    }
}

/// Local κ-weighted projections of `u` onto the retained eigenvectors and
/// the truncation inequality `∫κ|u − I^{S_i}u|² ≤ λ_{n_b+1}⁻¹ ∫κ|∇u|²` per
/// neighborhood.
pub fn coarse_interpolant_report(
    bases: &[LocalEigenBasis],
    shapes: &ShapeValues,
    neighborhoods: &Neighborhoods,
    u: &NodalVector,
    kappa: &PermeabilityField,
    mesh: &FineMesh,
) -> Result<InterpolantReport> {
    if u.kind() != NodalKind::Full || u.len() != mesh.n_vertices() {
        return Err(Error::input("interpolant report expects a full-length nodal vector"));
    }
    if bases.len() != neighborhoods.len() || shapes.values.len() != neighborhoods.len() {
        return Err(Error::input("bases, shapes and neighborhoods disagree in count"));
    }
    let uv = u.values();
    let mut interp = vec![0.0; mesh.n_vertices()];
    let mut reports = Vec::with_capacity(bases.len());
    for (i, ((basis, w), e)) in bases.iter().zip(&shapes.values).zip(&neighborhoods.entries).enumerate() {
        let sys = assemble_on_cells(mesh, kappa, &e.cells)?;
        let ul: Vec<f64> = e.nodes.iter().map(|&v| uv[v]).collect();
        let mu = sys.mass.mul_vec(&ul);
        let mut proj = vec![0.0; ul.len()];
        for k in 0..basis.n_b {
            let psi = basis.mode(k);
            let c = dot(&psi, &mu);
            for (p, q) in proj.iter_mut().zip(&psi) {
                *p += c * q;
            }
        }
        for ((&v, &wk), &p) in e.nodes.iter().zip(w).zip(&proj) {
            interp[v] += wk * p;
        }
        let diff: Vec<f64> = ul.iter().zip(&proj).map(|(a, b)| a - b).collect();
        let residual_mass = sys.mass.quadratic_form(&diff);
        let energy = sys.stiffness.quadratic_form(&ul);
        let next = basis.next_eigenvalue();
        let mut rep = NeighborhoodTruncation {
            id: i,
            residual_mass,
            energy,
            next_eigenvalue: next,
            holds: None,
        };
        rep.holds = rep.bound().map(|b| residual_mass <= b + TRUNCATION_SLACK);
        reports.push(rep);
    }
    Ok(InterpolantReport {
        interpolant: NodalVector::full(mesh, interp)?,
        neighborhoods: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsening::{build_neighborhoods, PointCloud, PointConstraint};
    use crate::fem::build_structured_mesh;
    use crate::msbasis::{local_spectral_bases, shape_functions};

    fn setup(points: Vec<[f64; 2]>, radii: Vec<f64>, n_b: usize) -> (FineMesh, PermeabilityField, PointCloud, Neighborhoods, Vec<LocalEigenBasis>, ShapeValues) {
        let mesh = build_structured_mesh(10, 10).unwrap();
        let kappa = PermeabilityField::new(
            (0..mesh.n_triangles()).map(|t| if (t / 20) % 3 == 1 { 30.0 } else { 1.0 }).collect(),
        )
        .unwrap();
        let n = points.len();
        let cloud = PointCloud {
            points,
            constraints: vec![PointConstraint::Free; n],
            radii,
            seed: 0,
            gamma: Some(2.0),
            iterations: 0,
        };
        let nb = build_neighborhoods(&mesh, &cloud).unwrap();
        let bases = local_spectral_bases(&nb, &mesh, &kappa, n_b).unwrap();
        let shapes = shape_functions(&cloud, &nb, &mesh).unwrap();
        (mesh, kappa, cloud, nb, bases, shapes)
    }

    #[test]
    fn span_of_retained_modes_is_reproduced() {
        let (mesh, kappa, _, nb, bases, shapes) = setup(vec![[0.5, 0.5]], vec![1.0], 3);
        let nodes = &nb.entries[0].nodes;
        let mut u = vec![0.0; mesh.n_vertices()];
        for (l, &v) in nodes.iter().enumerate() {
            u[v] = 0.7 * bases[0].eigenvectors[(l, 0)] - 1.3 * bases[0].eigenvectors[(l, 2)];
        }
        let u = NodalVector::full(&mesh, u).unwrap();
        let r = coarse_interpolant_report(&bases, &shapes, &nb, &u, &kappa, &mesh).unwrap();
        let err = r.interpolant.sub(&u).unwrap().max_abs();
        assert!(err < 1e-9, "{err}");
        assert!(r.neighborhoods[0].residual_mass < 1e-18);
    }

    #[test]
    fn next_mode_is_annihilated_with_equality() {
        let (mesh, kappa, _, nb, bases, shapes) = setup(vec![[0.5, 0.5]], vec![1.0], 3);
        let mut u = vec![0.0; mesh.n_vertices()];
        for (l, &v) in nb.entries[0].nodes.iter().enumerate() {
            u[v] = bases[0].eigenvectors[(l, 3)];
        }
        let u = NodalVector::full(&mesh, u).unwrap();
        let r = coarse_interpolant_report(&bases, &shapes, &nb, &u, &kappa, &mesh).unwrap();
        assert!(r.interpolant.max_abs() < 1e-9);
        let n = &r.neighborhoods[0];
        assert!((n.residual_mass - 1.0).abs() < 1e-9);
        let lam = n.next_eigenvalue.unwrap();
        assert!((n.residual_mass * lam - n.energy).abs() <= 1e-8 * n.energy);
        assert_eq!(n.holds, Some(true));
    }

    #[test]
    fn random_fields_satisfy_bound() {
        use rand::{Rng, SeedableRng};
        let pts = vec![[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75], [0.5, 0.5]];
        let (mesh, kappa, _, nb, bases, shapes) = setup(pts, vec![0.45; 5], 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let u = NodalVector::full(&mesh, (0..mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let r = coarse_interpolant_report(&bases, &shapes, &nb, &u, &kappa, &mesh).unwrap();
            assert!(r.all_hold());
            assert!(r.neighborhoods.iter().all(|n| n.holds.is_some()));
        }
    }

    #[test]
    fn reduced_input_rejected() {
        let (mesh, kappa, _, nb, bases, shapes) = setup(vec![[0.5, 0.5]], vec![1.0], 1);
        let u = NodalVector::zeros(&mesh, NodalKind::Reduced);
        assert!(coarse_interpolant_report(&bases, &shapes, &nb, &u, &kappa, &mesh).is_err());
    }
}

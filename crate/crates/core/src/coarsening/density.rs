use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, assemble_stiffness, FineMesh, MassWeight, NodalKind, NodalVector,
    PermeabilityField,
};
use crate::linalg::spd_solve;

/// Lower bound on the density so Lloyd weights never vanish.
pub const DENSITY_FLOOR: f64 = 1e-6;

/// Screened smoothing of the initial condition,
/// `(M_unit + β A) ρ = M_unit p₀` with `ρ = 0` on the boundary, scaled to
/// unit maximum (when positive) and floored at [`DENSITY_FLOOR`].
pub fn compute_density(
    mesh: &FineMesh,
    kappa: &PermeabilityField,
    p0: &NodalVector,
    beta: f64,
) -> Result<NodalVector> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::input(format!("density smoothing beta must be >= 0, got {beta}")));
    }
    if p0.kind() != NodalKind::Full {
        return Err(Error::input("compute_density expects a full-length initial condition"));
    }
    let m = assemble_mass(mesh, MassWeight::Unit)?;
    let system = if beta > 0.0 {
        m.add_scaled(1.0, &assemble_stiffness(mesh, kappa)?, beta)?
    } else {
        m.clone()
    };
    let rhs = NodalVector::full(mesh, m.mul_vec(p0.values()))?.to_reduced(mesh);
    let reduced = system.principal_submatrix(mesh.interior_nodes());
    let rho = spd_solve(&reduced, rhs.values(), 1e-13)?;
    let mut full = NodalVector::reduced(mesh, rho)?.to_full(mesh).into_values();
    let max = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        full.iter_mut().for_each(|v| *v /= max);
    }
    full.iter_mut().for_each(|v| *v = v.max(DENSITY_FLOOR));
    NodalVector::full(mesh, full)
}

use rayon::prelude::*;

use crate::coarsening::{Neighborhood, Neighborhoods};
use crate::error::{Error, Result};
use crate::fem::{assemble_on_cells, FineMesh, PermeabilityField};
use crate::linalg::{lowest_generalized_modes, DenseMatrix, LowestModesOptions};

/// Lowest modes of `−div(κ∇ψ) = λκψ` on one neighborhood with natural
/// boundary conditions, normalized to `∫κψ² = 1`.
///
/// One mode beyond the retained `n_b` is kept when the neighborhood has
/// enough DOFs, for the interpolation bound.
#[derive(Debug, Clone)]
pub struct LocalEigenBasis {
    pub id: usize,
    /// Ascending; length `n_b` or `n_b + 1`.
    pub eigenvalues: Vec<f64>,
    /// Columns are modes over the neighborhood's local DOFs.
    pub eigenvectors: DenseMatrix,
    pub n_b: usize,
}

impl LocalEigenBasis {
    /// `λ_{n_b+1}` if it was computed.
    pub fn next_eigenvalue(&self) -> Option<f64> {
        self.eigenvalues.get(self.n_b).copied()
    }

    /// The same basis with fewer retained modes.
    pub fn truncated(&self, n_b: usize) -> Result<Self> {
        if n_b > self.n_b {
            return Err(Error::input(format!(
                "cannot widen a basis of {} modes to {n_b}",
                self.n_b
            )));
        }
        let keep = (n_b + 1).min(self.eigenvalues.len());
        Ok(Self {
            id: self.id,
            eigenvalues: self.eigenvalues[..keep].to_vec(),
            eigenvectors: self.eigenvectors.leading_columns(keep),
            n_b,
        })
    }

    pub fn mode(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }
}

fn shift_for(mesh: &FineMesh, nbhd: &Neighborhood) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &v in &nbhd.nodes {
        let p = mesh.vertices()[v];
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let diam2 = (hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2);
    1.0 / diam2.max(f64::MIN_POSITIVE)
}

pub fn local_spectral_basis(
    nbhd: &Neighborhood,
    id: usize,
    mesh: &FineMesh,
    kappa: &PermeabilityField,
    n_b: usize,
) -> Result<LocalEigenBasis> {
    let n = nbhd.nodes.len();
    if n_b == 0 || n_b > n {
        return Err(Error::input(format!(
            "neighborhood {id} has {n} DOFs, cannot retain {n_b} modes"
        )));
    }
    let sys = assemble_on_cells(mesh, kappa, &nbhd.cells)?;
    let k = (n_b + 1).min(n);
    let opts = LowestModesOptions {
        shift: Some(shift_for(mesh, nbhd)),
        seed: id as u64,
        ..LowestModesOptions::default()
    };
    let modes = lowest_generalized_modes(&sys.stiffness, &sys.mass, k, &opts)
        .map_err(|e| e.context(format!("local spectral problem {id}")))?;
    Ok(LocalEigenBasis {
        id,
        eigenvalues: modes.values,
        eigenvectors: modes.vectors,
        n_b,
    })
}

/// Local bases of every neighborhood, computed in parallel and returned in
/// neighborhood order.
pub fn local_spectral_bases(
    neighborhoods: &Neighborhoods,
    mesh: &FineMesh,
    kappa: &PermeabilityField,
    n_b: usize,
) -> Result<Vec<LocalEigenBasis>> {
    neighborhoods
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| local_spectral_basis(e, i, mesh, kappa, n_b))
        .collect()
}

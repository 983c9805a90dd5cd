//! Sparse and dense linear algebra used throughout the solver: CSR storage,
//! SPD solves, dense symmetric (generalized) eigenproblems, a sparse
//! shift-invert eigensolver for the lowest modes, and φ-function evaluation.

mod cholesky;
mod dense;
mod eigen;
mod lowest_modes;
mod phi;
mod solve;
mod sparse;

pub use cholesky::{envelope_size, SparseCholesky};
pub use dense::{DenseCholesky, DenseMatrix};
pub use eigen::{fix_sign, sym_eig, sym_generalized_eig, tridiagonal_eigenvalues, EigenPairs};
pub use lowest_modes::{lowest_generalized_modes, LowestModesOptions};
pub use phi::{apply_phi1_pencil, phi1, phi_scalar, EigenPencilDecomp, PHI1_SERIES_THRESHOLD};
pub use solve::{pcg, spd_solve};
pub use sparse::{csr_from_triplets, SparseMatrix};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

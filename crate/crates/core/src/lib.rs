//! Meshfree generalized multiscale finite elements for semilinear parabolic
//! flow in high-contrast media, with backward Euler and exponential Euler
//! coarse integrators.

pub mod coarsening;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod linalg;
pub mod msbasis;
pub mod timeint;

pub use error::{Error, Result};
pub use fem::{FineMesh, NodalKind, NodalVector, PermeabilityField};
pub use linalg::{DenseMatrix, EigenPencilDecomp, SparseMatrix};

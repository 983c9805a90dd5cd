//! Local spectral bases, partition of unity and the coarse multiscale space.

mod interpolant;
mod local;
mod shape;
mod space;

pub use interpolant::{
    coarse_interpolant_report, InterpolantReport, NeighborhoodTruncation, TRUNCATION_SLACK,
    VACUOUS_EIGENVALUE,
};
pub use local::{local_spectral_basis, local_spectral_bases, LocalEigenBasis};
pub use shape::{cubic_kernel, shape_functions, ShapeValues};
pub use space::{build_multiscale_space, coarse_matrices, MultiscaleSpace};

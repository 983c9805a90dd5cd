//! Meshfree coarse scale: density-driven point cloud, radii, overlapping
//! neighborhoods and cover diagnostics.

mod cloud;
mod density;
mod neighborhoods;

pub use cloud::{
    compute_radii, generate_point_cloud, generate_point_cloud_with, CloudInit, PointCloud,
    PointConstraint, LLOYD_TOL,
};
pub use density::{compute_density, DENSITY_FLOOR};
pub use neighborhoods::{
    build_neighborhoods, cells_within_radius, coverage_diagnostics, nearest_cell,
    overlap_spectral_bound, CoverReport, Neighborhood, Neighborhoods, REPAIR_FACTOR,
    REPAIR_ROUNDS,
};

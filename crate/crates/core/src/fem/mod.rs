//! P1 finite elements on a structured triangulation of the unit square.

mod assembly;
mod field;
mod mesh;

pub use assembly::{
    apply_dirichlet, assemble_load, assemble_mass, assemble_on_cells, assemble_stiffness,
    local_mass, local_stiffness, weighted_norms, CellSubsetSystem, MassWeight, WeightedNorms,
};
pub use field::{NodalKind, NodalVector, PermeabilityField};
pub use mesh::{build_structured_mesh, FineMesh};

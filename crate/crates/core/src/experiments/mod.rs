//! Configuration, permeability fields, experiment runners and exports.

mod config;
mod export;
mod permeability;
mod pipeline;

pub use config::{
    load_config, BuiltinField, ExperimentConfig, InitialCondition, MeshSpec, Model, PermeabilitySource,
};
pub use export::{
    cloud_csv, export_cloud_csv, export_diag_json, export_field_vtk, export_table_csv, field_vtk, format_percent,
    table_csv,
};
pub use permeability::{
    builtin_raster, format_raster, generate_permeability, load_permeability, parse_raster, GeneratorSpec,
};
pub use pipeline::{
    build_coarse_level, build_cover, build_point_cloud, reference_key, reference_solution, resolve_permeability,
    run_both, run_diagnostics, run_reference, run_sweep, run_sweep_with, CoarseLevel, ErrorRow, ErrorTable,
    GammaDiagnostics, Method, Problem, SweepKind, SweepOutput,
};

use std::fmt::Write as _;
use std::path::Path;

use super::pipeline::{ErrorTable, GammaDiagnostics};
use crate::coarsening::PointCloud;
use crate::error::{Error, Result};
use crate::fem::{FineMesh, NodalKind, NodalVector, PermeabilityField};

/// Three decimals, ties to even on the exact binary value.
pub fn format_percent(x: f64) -> String {
    // `{:.3}` rounds the exact decimal expansion half to even.
    format!("{x:.3}")
}

pub fn table_csv(table: &ErrorTable) -> String {
    let mut out = String::from("M,param,L2_percent,H1_percent\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.m,
            r.param,
            format_percent(r.l2_percent),
            format_percent(r.h1_percent)
        );
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn export_table_csv(table: &ErrorTable, path: &Path) -> Result<()> {
    write_file(path, &table_csv(table))
}

/// Legacy ASCII unstructured grid with point scalar `pressure` and cell
/// scalar `kappa`.
pub fn field_vtk(field: &NodalVector, kappa: &PermeabilityField, mesh: &FineMesh) -> Result<String> {
    let full = match field.kind() {
        NodalKind::Full if field.len() == mesh.n_vertices() => field.clone(),
        NodalKind::Reduced if field.len() == mesh.n_interior() => field.to_full(mesh),
        _ => return Err(Error::input("field does not match the mesh")),
    };
    if kappa.len() != mesh.n_triangles() {
        return Err(Error::input("permeability does not match the mesh"));
    }
    let (nv, nt) = (mesh.n_vertices(), mesh.n_triangles());
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nmsflow pressure field\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {nv} double");
    for [x, y] in mesh.vertices() {
        let _ = writeln!(s, "{x} {y} 0");
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {nv}\nSCALARS pressure double 1\nLOOKUP_TABLE default");
    for v in full.values() {
        let _ = writeln!(s, "{v}");
    }
    let _ = writeln!(s, "CELL_DATA {nt}\nSCALARS kappa double 1\nLOOKUP_TABLE default");
    for v in kappa.values() {
        let _ = writeln!(s, "{v}");
    }
    Ok(s)
}

pub fn export_field_vtk(field: &NodalVector, kappa: &PermeabilityField, mesh: &FineMesh, path: &Path) -> Result<()> {
    write_file(path, &field_vtk(field, kappa, mesh)?)
}

/// `x,y,r` per point.
pub fn cloud_csv(cloud: &PointCloud) -> Result<String> {
    if cloud.radii.len() != cloud.points.len() {
        return Err(Error::input("cloud has no radii"));
    }
    let mut s = String::from("x,y,r\n");
    for ([x, y], r) in cloud.points.iter().zip(&cloud.radii) {
        let _ = writeln!(s, "{x},{y},{r}");
    }
    Ok(s)
}

pub fn export_cloud_csv(cloud: &PointCloud, path: &Path) -> Result<()> {
    write_file(path, &cloud_csv(cloud)?)
}

pub fn export_diag_json(diag: &[GammaDiagnostics], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(diag).expect("diagnostics serialize");
    write_file(path, &(text + "\n"))
}

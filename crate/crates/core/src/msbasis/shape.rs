use crate::coarsening::{Neighborhoods, PointCloud};
use crate::error::{Error, Result};
use crate::fem::FineMesh;

/// Cubic spline kernel of the normalized distance `r = ‖x − x_i‖ / r_i`.
pub fn cubic_kernel(r: f64) -> f64 {
    if r <= 0.5 {
        2.0 * (2.0 / 3.0 + 4.0 * (r - 1.0) * r * r)
    } else if r <= 1.0 {
        2.0 * (4.0 / 3.0) * (1.0 - r).powi(3)
    } else {
        0.0
    }
}

/// Shepard partition of unity `W_i = φ_i / Σ_j φ_j` evaluated at the nodes
/// of each neighborhood; kernels are cut off outside their neighborhood's
/// node set before normalizing.
#[derive(Debug, Clone)]
pub struct ShapeValues {
    /// `values[i][k]` is `W_i` at `neighborhoods.entries[i].nodes[k]`.
    pub values: Vec<Vec<f64>>,
}

impl ShapeValues {
    /// `Σ_i W_i` at every mesh vertex.
    pub fn sum_at_nodes(&self, neighborhoods: &Neighborhoods, n_vertices: usize) -> Vec<f64> {
        let mut sum = vec![0.0; n_vertices];
        for (w, e) in self.values.iter().zip(&neighborhoods.entries) {
            for (&v, &x) in e.nodes.iter().zip(w) {
                sum[v] += x;
            }
        }
        sum
    }
}

pub fn shape_functions(
    cloud: &PointCloud,
    neighborhoods: &Neighborhoods,
    mesh: &FineMesh,
) -> Result<ShapeValues> {
    if cloud.points.len() != neighborhoods.len() || neighborhoods.radii.len() != cloud.points.len() {
        return Err(Error::input("point cloud and neighborhoods disagree"));
    }
    let verts = mesh.vertices();
    let raw: Vec<Vec<f64>> = neighborhoods
        .entries
        .iter()
        .zip(cloud.points.iter().zip(&neighborhoods.radii))
        .map(|(e, (&x, &r))| {
            e.nodes
                .iter()
                .map(|&v| {
                    let p = verts[v];
                    cubic_kernel((p[0] - x[0]).hypot(p[1] - x[1]) / r)
                })
                .collect()
        })
        .collect();
    let mut total = vec![0.0; mesh.n_vertices()];
    for (w, e) in raw.iter().zip(&neighborhoods.entries) {
        for (&v, &x) in e.nodes.iter().zip(w) {
            total[v] += x;
        }
    }
    let mut values = Vec::with_capacity(raw.len());
    for (w, e) in raw.into_iter().zip(&neighborhoods.entries) {
        let mut out = Vec::with_capacity(w.len());
        for (&v, x) in e.nodes.iter().zip(w) {
            if !(total[v] > 0.0) {
                return Err(Error::Coverage(format!(
                    "no kernel is positive at vertex {v} ({:?})",
                    verts[v]
                )));
            }
            out.push(x / total[v]);
        }
        values.push(out);
    }
    Ok(ShapeValues { values })
}

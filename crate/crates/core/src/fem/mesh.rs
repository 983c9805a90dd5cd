use crate::error::{Error, Result};

/// Structured triangulation of the unit square. Square `(i, j)` is split
/// along its lower-left to upper-right diagonal into triangles `2s` and
/// `2s + 1` with `s = j·nx + i`; both are counter-clockwise.
#[derive(Debug, Clone)]
pub struct FineMesh {
    nx: usize,
    ny: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_nodes: Vec<usize>,
    interior_nodes: Vec<usize>,
    /// Global vertex → position in `interior_nodes`.
    interior_index: Vec<Option<usize>>,
}

pub fn build_structured_mesh(nx: usize, ny: usize) -> Result<FineMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::input(format!("mesh needs nx, ny >= 1, got {nx}x{ny}")));
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut boundary_nodes = Vec::new();
    let mut interior_nodes = Vec::new();
    let mut interior_index = vec![None; vertices.len()];
    for j in 0..=ny {
        for i in 0..=nx {
            let v = vid(i, j);
            if i == 0 || j == 0 || i == nx || j == ny {
                boundary_nodes.push(v);
            } else {
                interior_index[v] = Some(interior_nodes.len());
                interior_nodes.push(v);
            }
        }
    }
    Ok(FineMesh {
        nx,
        ny,
        vertices,
        triangles,
        boundary_nodes,
        interior_nodes,
        interior_index,
    })
}

impl FineMesh {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Interior vertices in increasing global order; position = reduced DOF.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn n_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn interior_index(&self, v: usize) -> Option<usize> {
        self.interior_index[v]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.interior_index[v].is_none()
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area (positive for counter-clockwise triangles).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p, q, r] = self.triangle_coords(t);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [p, q, r] = self.triangle_coords(t);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Mesh square `(i, j)` holding triangle `t`.
    pub fn square_of(&self, t: usize) -> (usize, usize) {
        let s = t / 2;
        (s % self.nx, s / self.nx)
    }

    /// Triangles sharing an edge with `t`, in a fixed order.
    pub fn edge_neighbors(&self, t: usize) -> Vec<usize> {
        let (i, j) = self.square_of(t);
        let s = t / 2;
        let mut out = Vec::with_capacity(3);
        if t % 2 == 0 {
            // Lower triangle: edges bottom, right, diagonal.
            if j > 0 {
                out.push(2 * (s - self.nx) + 1);
            }
            if i + 1 < self.nx {
                out.push(2 * (s + 1) + 1);
            }
            out.push(t + 1);
        } else {
            // Upper triangle: edges diagonal, top, left.
            out.push(t - 1);
            if j + 1 < self.ny {
                out.push(2 * (s + self.nx));
            }
            if i > 0 {
                out.push(2 * (s - 1));
            }
        }
        out
    }

    /// Triangles owning each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }
}

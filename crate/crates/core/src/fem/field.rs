use super::FineMesh;
use crate::error::{Error, Result};

/// Cell-wise constant permeability, one value per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct PermeabilityField {
    values: Vec<f64>,
    kappa_min: f64,
    kappa_max: f64,
}

impl PermeabilityField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("permeability field is empty"));
        }
        let mut kappa_min = f64::INFINITY;
        let mut kappa_max: f64 = 0.0;
        for (c, &v) in values.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::input(format!("permeability of cell {c} is {v}")));
            }
            kappa_min = kappa_min.min(v);
            kappa_max = kappa_max.max(v);
        }
        Ok(Self {
            values,
            kappa_min,
            kappa_max,
        })
    }

    pub fn uniform(mesh: &FineMesh, value: f64) -> Result<Self> {
        Self::new(vec![value; mesh.n_triangles()])
    }

    /// Expand one value per mesh square (row-major from the bottom row) to
    /// both of its triangles.
    pub fn from_square_values(mesh: &FineMesh, squares: &[f64]) -> Result<Self> {
        if squares.len() != mesh.nx() * mesh.ny() {
            return Err(Error::input(format!(
                "{} square values for a {}x{} mesh",
                squares.len(),
                mesh.nx(),
                mesh.ny()
            )));
        }
        Self::new(squares.iter().flat_map(|&v| [v, v]).collect())
    }

    pub fn for_mesh(self, mesh: &FineMesh) -> Result<Self> {
        if self.values.len() != mesh.n_triangles() {
            return Err(Error::input(format!(
                "permeability has {} cells, mesh has {} triangles",
                self.values.len(),
                mesh.n_triangles()
            )));
        }
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa_min
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    pub fn contrast(&self) -> f64 {
        self.kappa_max / self.kappa_min
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodalKind {
    /// One value per mesh vertex.
    Full,
    /// One value per interior vertex, ordered as `FineMesh::interior_nodes`.
    Reduced,
}

/// Nodal values on the fine mesh, tagged with their indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalVector {
    values: Vec<f64>,
    kind: NodalKind,
}

impl NodalVector {
    pub fn new(mesh: &FineMesh, kind: NodalKind, values: Vec<f64>) -> Result<Self> {
        let expected = match kind {
            NodalKind::Full => mesh.n_vertices(),
            NodalKind::Reduced => mesh.n_interior(),
        };
        if values.len() != expected {
            return Err(Error::input(format!(
                "{kind:?} nodal vector needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self { values, kind })
    }

    /// Wraps values whose length the caller has already checked.
    pub(crate) fn from_parts(kind: NodalKind, values: Vec<f64>) -> Self {
        Self { values, kind }
    }

    pub fn full(mesh: &FineMesh, values: Vec<f64>) -> Result<Self> {
        Self::new(mesh, NodalKind::Full, values)
    }

    pub fn reduced(mesh: &FineMesh, values: Vec<f64>) -> Result<Self> {
        Self::new(mesh, NodalKind::Reduced, values)
    }

    pub fn zeros(mesh: &FineMesh, kind: NodalKind) -> Self {
        let n = match kind {
            NodalKind::Full => mesh.n_vertices(),
            NodalKind::Reduced => mesh.n_interior(),
        };
        Self {
            values: vec![0.0; n],
            kind,
        }
    }

    /// Full-length interpolant of `f(x, y)`.
    pub fn from_fn(mesh: &FineMesh, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            values: mesh.vertices().iter().map(|&[x, y]| f(x, y)).collect(),
            kind: NodalKind::Full,
        }
    }

    pub fn kind(&self) -> NodalKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Interior entries only; boundary values are discarded.
    pub fn to_reduced(&self, mesh: &FineMesh) -> NodalVector {
        match self.kind {
            NodalKind::Reduced => self.clone(),
            NodalKind::Full => NodalVector {
                values: mesh.interior_nodes().iter().map(|&v| self.values[v]).collect(),
                kind: NodalKind::Reduced,
            },
        }
    }

    /// Full-length vector with zeros on the boundary.
    pub fn to_full(&self, mesh: &FineMesh) -> NodalVector {
        match self.kind {
            NodalKind::Full => self.clone(),
            NodalKind::Reduced => {
                let mut values = vec![0.0; mesh.n_vertices()];
                for (k, &v) in mesh.interior_nodes().iter().enumerate() {
                    values[v] = self.values[k];
                }
                NodalVector {
                    values,
                    kind: NodalKind::Full,
                }
            }
        }
    }

    pub fn sub(&self, other: &NodalVector) -> Result<NodalVector> {
        if self.kind != other.kind || self.len() != other.len() {
            return Err(Error::input("nodal vectors of different layout"));
        }
        Ok(NodalVector {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            kind: self.kind,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

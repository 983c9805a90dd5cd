use super::{FineMesh, NodalKind, NodalVector, PermeabilityField};
use crate::error::{Error, Result};
use crate::linalg::{csr_from_triplets, SparseMatrix};

/// Cell weight of a mass matrix.
#[derive(Debug, Clone, Copy)]
pub enum MassWeight<'a> {
    Unit,
    Kappa(&'a PermeabilityField),
}

impl MassWeight<'_> {
    fn at(&self, t: usize) -> f64 {
        match self {
            MassWeight::Unit => 1.0,
            MassWeight::Kappa(k) => k.values()[t],
        }
    }
}

/// P1 stiffness of one triangle with unit coefficient.
pub fn local_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / area2, (p[k][0] - p[j][0]) / area2];
    }
    let area = 0.5 * area2.abs();
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    out
}

/// Consistent P1 mass of one triangle with unit weight.
pub fn local_mass(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let area = 0.5
        * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
            .abs();
    let mut out = [[area / 12.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    out
}

fn check_field(mesh: &FineMesh, kappa: &PermeabilityField) -> Result<()> {
    if kappa.len() != mesh.n_triangles() {
        return Err(Error::input(format!(
            "permeability has {} cells, mesh has {} triangles",
            kappa.len(),
            mesh.n_triangles()
        )));
    }
    Ok(())
}

fn assemble(
    mesh: &FineMesh,
    cells: impl Iterator<Item = usize>,
    node_map: impl Fn(usize) -> usize,
    n: usize,
    weight: impl Fn(usize) -> f64,
    local: fn([[f64; 2]; 3]) -> [[f64; 3]; 3],
) -> Result<SparseMatrix> {
    let mut triplets = Vec::new();
    for t in cells {
        let w = weight(t);
        let k = local(mesh.triangle_coords(t));
        let tri = mesh.triangles()[t];
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((node_map(tri[a]), node_map(tri[b]), w * k[a][b]));
            }
        }
    }
    csr_from_triplets(&triplets, n, n, true)
}

/// κ-weighted stiffness `A_ij = ∫ κ ∇φ_i · ∇φ_j` over all vertices.
pub fn assemble_stiffness(mesh: &FineMesh, kappa: &PermeabilityField) -> Result<SparseMatrix> {
    check_field(mesh, kappa)?;
    let n = mesh.n_vertices();
    assemble(mesh, 0..mesh.n_triangles(), |v| v, n, |t| kappa.values()[t], local_stiffness)
}

/// Consistent mass `M_ij = ∫ w φ_i φ_j` over all vertices.
pub fn assemble_mass(mesh: &FineMesh, weight: MassWeight<'_>) -> Result<SparseMatrix> {
    if let MassWeight::Kappa(k) = weight {
        check_field(mesh, k)?;
    }
    let n = mesh.n_vertices();
    assemble(mesh, 0..mesh.n_triangles(), |v| v, n, |t| weight.at(t), local_mass)
}

/// Matrices of a cell subset with natural boundary conditions, indexed by
/// the sorted vertex list `nodes`.
#[derive(Debug, Clone)]
pub struct CellSubsetSystem {
    pub nodes: Vec<usize>,
    pub stiffness: SparseMatrix,
    pub mass: SparseMatrix,
}

/// κ-weighted stiffness and κ-weighted mass restricted to `cells`.
pub fn assemble_on_cells(
    mesh: &FineMesh,
    kappa: &PermeabilityField,
    cells: &[usize],
) -> Result<CellSubsetSystem> {
    check_field(mesh, kappa)?;
    let mut nodes: Vec<usize> = cells.iter().flat_map(|&t| mesh.triangles()[t]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut local = vec![usize::MAX; mesh.n_vertices()];
    for (k, &v) in nodes.iter().enumerate() {
        local[v] = k;
    }
    let n = nodes.len();
    let map = |v: usize| local[v];
    let w = |t: usize| kappa.values()[t];
    let stiffness = assemble(mesh, cells.iter().copied(), map, n, w, local_stiffness)?;
    let mass = assemble(mesh, cells.iter().copied(), map, n, w, local_mass)?;
    Ok(CellSubsetSystem {
        nodes,
        stiffness,
        mass,
    })
}

/// Group-FEM load `b = M_unit f` for full-length nodal source values.
pub fn assemble_load(mesh: &FineMesh, nodal_f: &NodalVector) -> Result<NodalVector> {
    if nodal_f.kind() != NodalKind::Full {
        return Err(Error::input("assemble_load expects a full-length nodal vector"));
    }
    let m = assemble_mass(mesh, MassWeight::Unit)?;
    NodalVector::full(mesh, m.mul_vec(nodal_f.values()))
}

/// Eliminate boundary rows and columns for homogeneous Dirichlet data.
pub fn apply_dirichlet(
    matrix: &SparseMatrix,
    rhs: &NodalVector,
    mesh: &FineMesh,
    value: f64,
) -> Result<(SparseMatrix, NodalVector)> {
    if value != 0.0 {
        return Err(Error::Unsupported(format!(
            "non-homogeneous Dirichlet value {value}"
        )));
    }
    if matrix.n_rows() != mesh.n_vertices() || matrix.n_cols() != mesh.n_vertices() {
        return Err(Error::input("apply_dirichlet: matrix is not vertex-indexed"));
    }
    if rhs.kind() != NodalKind::Full {
        return Err(Error::input("apply_dirichlet expects a full-length right-hand side"));
    }
    Ok((
        matrix.principal_submatrix(mesh.interior_nodes()),
        rhs.to_reduced(mesh),
    ))
}

/// κ-weighted mass and stiffness kept for repeated norm evaluation.
#[derive(Debug, Clone)]
pub struct WeightedNorms {
    mass: SparseMatrix,
    stiffness: SparseMatrix,
}

impl WeightedNorms {
    pub fn new(mesh: &FineMesh, kappa: &PermeabilityField) -> Result<Self> {
        Ok(Self {
            mass: assemble_mass(mesh, MassWeight::Kappa(kappa))?,
            stiffness: assemble_stiffness(mesh, kappa)?,
        })
    }

    /// `(√(eᵀM_κe), √(eᵀAe))` for a full-length vector.
    pub fn eval(&self, e: &[f64]) -> Result<(f64, f64)> {
        if e.len() != self.mass.n_rows() {
            return Err(Error::input("weighted norm of a vector with the wrong length"));
        }
        Ok((
            self.mass.quadratic_form(e).max(0.0).sqrt(),
            self.stiffness.quadratic_form(e).max(0.0).sqrt(),
        ))
    }

    /// Relative errors `‖a − b‖/‖b‖` in percent, (L², H¹).
    pub fn relative_percent(&self, approx: &[f64], reference: &[f64]) -> Result<(f64, f64)> {
        let diff: Vec<f64> = approx.iter().zip(reference).map(|(a, b)| a - b).collect();
        let (el2, eh1) = self.eval(&diff)?;
        let (rl2, rh1) = self.eval(reference)?;
        let pct = |e: f64, r: f64| if r > 0.0 { 100.0 * e / r } else if e == 0.0 { 0.0 } else { f64::INFINITY };
        Ok((pct(el2, rl2), pct(eh1, rh1)))
    }
}

/// κ-weighted L² and H¹ seminorm of a full-length vector.
pub fn weighted_norms(
    e: &NodalVector,
    kappa: &PermeabilityField,
    mesh: &FineMesh,
) -> Result<(f64, f64)> {
    if e.kind() != NodalKind::Full {
        return Err(Error::input("weighted_norms expects a full-length vector"));
    }
    WeightedNorms::new(mesh, kappa)?.eval(e.values())
}

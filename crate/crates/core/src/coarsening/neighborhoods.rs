use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::fem::FineMesh;
use crate::linalg::dot;

/// Radius growth per coverage-repair round.
pub const REPAIR_FACTOR: f64 = 1.1;
/// Maximum number of coverage-repair rounds.
pub const REPAIR_ROUNDS: usize = 20;

/// Support `S_i` of the basis functions anchored at one coarse point.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    /// Fine cells, ascending.
    pub cells: Vec<usize>,
    /// Vertices of those cells, ascending; position = local DOF.
    pub nodes: Vec<usize>,
    /// Local DOFs (positions in `nodes`) that are interior mesh vertices.
    pub interior_local: Vec<usize>,
    /// Reduced (interior) global indices matching `interior_local`.
    pub interior_dofs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    pub entries: Vec<Neighborhood>,
    /// Radii after coverage repair.
    pub radii: Vec<f64>,
    pub repair_rounds: usize,
    pub n_cells: usize,
}

impl Neighborhoods {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Neighborhood indices containing each fine cell.
    pub fn cell_membership(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_cells];
        for (i, e) in self.entries.iter().enumerate() {
            for &c in &e.cells {
                out[c].push(i);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub covered: bool,
    pub c_ov: usize,
    pub delta: f64,
    pub lambda_max_overlap: f64,
}

impl CoverReport {
    /// `λ_max(ε) ≤ C_ov` up to round-off.
    pub fn overlap_bound_holds(&self) -> bool {
        self.lambda_max_overlap <= self.c_ov as f64 + 1e-9
    }
}

/// Cells whose farthest vertex lies within `r` of `x`.
pub fn cells_within_radius(mesh: &FineMesh, x: [f64; 2], r: f64) -> Vec<usize> {
    let r2 = r * r;
    let verts = mesh.vertices();
    let inside: Vec<bool> = verts
        .iter()
        .map(|v| (v[0] - x[0]).powi(2) + (v[1] - x[1]).powi(2) <= r2)
        .collect();
    (0..mesh.n_triangles())
        .filter(|&t| mesh.triangles()[t].iter().all(|&v| inside[v]))
        .collect()
}

/// Cell whose centroid is nearest `x` (lowest index on ties).
pub fn nearest_cell(mesh: &FineMesh, x: [f64; 2]) -> usize {
    // Candidates live in the square containing x and its neighbours.
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let ci = ((x[0] * nx as f64).floor() as isize).clamp(0, nx as isize - 1);
    let cj = ((x[1] * ny as f64).floor() as isize).clamp(0, ny as isize - 1);
    let mut best = usize::MAX;
    let mut best_d = f64::INFINITY;
    for dj in -1..=1 {
        for di in -1..=1 {
            let (i, j) = (ci + di, cj + dj);
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                continue;
            }
            let s = j as usize * nx + i as usize;
            for t in [2 * s, 2 * s + 1] {
                let c = mesh.centroid(t);
                let d = (c[0] - x[0]).powi(2) + (c[1] - x[1]).powi(2);
                if d < best_d || (d == best_d && t < best) {
                    best = t;
                    best_d = d;
                }
            }
        }
    }
    best
}

/// Edge-connected component of `candidates` (a cell mask) containing `seed`.
fn component(mesh: &FineMesh, candidates: &[bool], seed: usize) -> Vec<usize> {
    let mut seen = vec![false; candidates.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::from([seed]);
    seen[seed] = true;
    while let Some(t) = queue.pop_front() {
        out.push(t);
        for n in mesh.edge_neighbors(t) {
            if candidates[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    out.sort_unstable();
    out
}

fn neighborhood_from_cells(mesh: &FineMesh, cells: Vec<usize>) -> Neighborhood {
    let mut nodes: Vec<usize> = cells.iter().flat_map(|&t| mesh.triangles()[t]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut interior_local = Vec::new();
    let mut interior_dofs = Vec::new();
    for (k, &v) in nodes.iter().enumerate() {
        if let Some(d) = mesh.interior_index(v) {
            interior_local.push(k);
            interior_dofs.push(d);
        }
    }
    Neighborhood {
        cells,
        nodes,
        interior_local,
        interior_dofs,
    }
}

/// Build `S_i` by the max-vertex rule, keep the edge-connected component of
/// the cell nearest `x_i`, and grow all radii by [`REPAIR_FACTOR`] until
/// every cell is covered and no `S_i` is empty.
pub fn build_neighborhoods(mesh: &FineMesh, cloud: &PointCloud) -> Result<Neighborhoods> {
    if cloud.radii.len() != cloud.points.len() {
        return Err(Error::input("build_neighborhoods needs radii for every point"));
    }
    if cloud.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::input("neighborhood radii must be positive"));
    }
    let anchors: Vec<usize> = cloud.points.iter().map(|&p| nearest_cell(mesh, p)).collect();
    let mut radii = cloud.radii.clone();
    let n_cells = mesh.n_triangles();
    for round in 0..=REPAIR_ROUNDS {
        let mut entries = Vec::with_capacity(radii.len());
        let mut covered = vec![false; n_cells];
        let mut empty = Vec::new();
        for (i, (&p, &r)) in cloud.points.iter().zip(&radii).enumerate() {
            let mut mask = vec![false; n_cells];
            for t in cells_within_radius(mesh, p, r) {
                mask[t] = true;
            }
            let cells = if mask[anchors[i]] {
                component(mesh, &mask, anchors[i])
            } else {
                empty.push(i);
                Vec::new()
            };
            for &t in &cells {
                covered[t] = true;
            }
            entries.push(neighborhood_from_cells(mesh, cells));
        }
        let uncovered: Vec<usize> = (0..n_cells).filter(|&t| !covered[t]).collect();
        if uncovered.is_empty() && empty.is_empty() {
            return Ok(Neighborhoods {
                entries,
                radii,
                repair_rounds: round,
                n_cells,
            });
        }
        if round == REPAIR_ROUNDS {
            let preview: Vec<String> = uncovered.iter().take(10).map(|t| t.to_string()).collect();
            return Err(Error::Coverage(format!(
                "{} cells uncovered and {} empty neighborhoods after {REPAIR_ROUNDS} repair rounds \
                 (first uncovered cells: {})",
                uncovered.len(),
                empty.len(),
                preview.join(", ")
            )));
        }
        log::debug!(
            "coverage repair round {}: {} uncovered cells, {} empty neighborhoods",
            round + 1,
            uncovered.len(),
            empty.len()
        );
        radii.iter_mut().for_each(|r| *r *= REPAIR_FACTOR);
    }
    unreachable!("repair loop returns on its last round")
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap[0] - s * ab[0]).hypot(ap[1] - s * ab[1])
}

/// Coverage, `C_ov`, overlap width `δ` and the overlap-matrix spectral
/// radius.
///
/// `δ_i` is the smallest distance from a centroid of a cell covered only by
/// `S_i` to the part of `∂S_i` inside the domain, or 0 when no such cell
/// exists. A neighborhood with no interior boundary does not constrain `δ`.
pub fn coverage_diagnostics(neighborhoods: &Neighborhoods, mesh: &FineMesh) -> CoverReport {
    let membership = neighborhoods.cell_membership();
    let covered = membership.iter().all(|m| !m.is_empty());
    let c_ov = membership.iter().map(Vec::len).max().unwrap_or(0);

    let mut delta = f64::INFINITY;
    let mut in_set = vec![false; mesh.n_triangles()];
    for (i, e) in neighborhoods.entries.iter().enumerate() {
        for &t in &e.cells {
            in_set[t] = true;
        }
        let mut edges = Vec::new();
        for &t in &e.cells {
            for n in mesh.edge_neighbors(t) {
                if !in_set[n] {
                    let shared: Vec<usize> = mesh.triangles()[t]
                        .iter()
                        .copied()
                        .filter(|v| mesh.triangles()[n].contains(v))
                        .collect();
                    edges.push((mesh.vertices()[shared[0]], mesh.vertices()[shared[1]]));
                }
            }
        }
        let exclusive: Vec<usize> = e
            .cells
            .iter()
            .copied()
            .filter(|&t| membership[t] == [i])
            .collect();
        let delta_i = if exclusive.is_empty() {
            0.0
        } else {
            exclusive
                .iter()
                .flat_map(|&t| {
                    let c = mesh.centroid(t);
                    edges.iter().map(move |&(a, b)| segment_distance(c, a, b))
                })
                .fold(f64::INFINITY, f64::min)
        };
        delta = delta.min(delta_i);
        for &t in &e.cells {
            in_set[t] = false;
        }
    }
    if !delta.is_finite() {
        // A single neighborhood spanning the whole domain.
        delta = 0.0;
    }
    CoverReport {
        covered,
        c_ov,
        delta,
        lambda_max_overlap: overlap_spectral_bound(neighborhoods),
    }
}

/// Largest eigenvalue of the 0/1 overlap matrix `ε` (`ε_ij = 1` iff `S_i`
/// and `S_j` share a cell, unit diagonal), by power iteration.
pub fn overlap_spectral_bound(neighborhoods: &Neighborhoods) -> f64 {
    let n = neighborhoods.len();
    if n == 0 {
        return 0.0;
    }
    let mut adj = vec![vec![false; n]; n];
    for (i, row) in adj.iter_mut().enumerate() {
        row[i] = true;
    }
    for members in neighborhoods.cell_membership() {
        for &a in &members {
            for &b in &members {
                adj[a][b] = true;
            }
        }
    }
    let lists: Vec<Vec<usize>> = adj
        .iter()
        .map(|row| (0..n).filter(|&j| row[j]).collect())
        .collect();
    power_iteration(&lists)
}

/// Dominant eigenvalue of a symmetric 0/1 matrix given as adjacency lists.
fn power_iteration(lists: &[Vec<usize>]) -> f64 {
    let n = lists.len();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    const MAX_ITERS: usize = 20_000;
    for _ in 0..MAX_ITERS {
        let y: Vec<f64> = lists.iter().map(|l| l.iter().map(|&j| x[j]).sum()).collect();
        let next = dot(&x, &y);
        let norm = dot(&y, &y).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x = y.into_iter().map(|v| v / norm).collect();
        if (next - lambda).abs() <= 1e-14 * next.abs() {
            return next;
        }
        lambda = next;
    }
    log::warn!("overlap power iteration stagnated; returning estimate {lambda}");
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsening::PointConstraint;
    use crate::fem::build_structured_mesh;

    fn cloud(points: Vec<[f64; 2]>, radii: Vec<f64>) -> PointCloud {
        let n = points.len();
        PointCloud {
            points,
            constraints: vec![PointConstraint::Free; n],
            radii,
            seed: 0,
            gamma: Some(2.0),
            iterations: 0,
        }
    }

    fn from_cells(mesh: &FineMesh, sets: Vec<Vec<usize>>) -> Neighborhoods {
        Neighborhoods {
            entries: sets.into_iter().map(|c| neighborhood_from_cells(mesh, c)).collect(),
            radii: Vec::new(),
            repair_rounds: 0,
            n_cells: mesh.n_triangles(),
        }
    }

    #[test]
    fn big_radius_takes_everything() {
        let mesh = build_structured_mesh(8, 8).unwrap();
        let nb = build_neighborhoods(&mesh, &cloud(vec![[0.5, 0.5]], vec![1.0])).unwrap();
        assert_eq!(nb.entries[0].cells.len(), mesh.n_triangles());
        assert_eq!(nb.repair_rounds, 0);
        let rep = coverage_diagnostics(&nb, &mesh);
        assert!(rep.covered);
        assert_eq!(rep.c_ov, 1);
        assert!((rep.lambda_max_overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_vertex_rule_by_hand() {
        // 2x2 mesh, h = 0.5. Triangle vertices farthest from the origin:
        // cells 0 (0,0),(.5,0),(.5,.5) and 1 (0,0),(.5,.5),(0,.5) reach 0.707.
        let mesh = build_structured_mesh(2, 2).unwrap();
        assert!(cells_within_radius(&mesh, [0.0, 0.0], 0.6).is_empty());
        assert_eq!(cells_within_radius(&mesh, [0.0, 0.0], 0.71), vec![0, 1]);
        // From (0.25, 0): cell 0 reaches √(0.25²+0.5²) = 0.559, cell 1 too.
        assert_eq!(cells_within_radius(&mesh, [0.25, 0.0], 0.6), vec![0, 1]);
    }

    #[test]
    fn repair_grows_tiny_radii() {
        let mesh = build_structured_mesh(10, 10).unwrap();
        let nb = build_neighborhoods(&mesh, &cloud(vec![[0.1, 0.1], [0.9, 0.9]], vec![0.3, 0.3]))
            .unwrap();
        assert!(nb.repair_rounds > 0);
        assert!(coverage_diagnostics(&nb, &mesh).covered);
        assert!(nb.radii[0] > 0.3);
    }

    #[test]
    fn repair_cap_reports_uncovered_cells() {
        let mesh = build_structured_mesh(10, 10).unwrap();
        match build_neighborhoods(&mesh, &cloud(vec![[0.5, 0.5]], vec![1e-4])) {
            Err(Error::Coverage(msg)) => assert!(msg.contains("uncovered")),
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn neighborhoods_are_connected_and_anchored() {
        let mesh = build_structured_mesh(12, 12).unwrap();
        let pts = vec![[0.2, 0.3], [0.7, 0.6], [0.5, 0.1], [0.9, 0.95]];
        let radii = vec![0.5; 4];
        let nb = build_neighborhoods(&mesh, &cloud(pts.clone(), radii)).unwrap();
        for (e, p) in nb.entries.iter().zip(&pts) {
            assert!(e.cells.contains(&nearest_cell(&mesh, *p)));
            let mut mask = vec![false; mesh.n_triangles()];
            e.cells.iter().for_each(|&t| mask[t] = true);
            assert_eq!(component(&mesh, &mask, e.cells[0]).len(), e.cells.len());
        }
    }

    #[test]
    fn duplicate_neighborhoods_overlap_fully() {
        let mesh = build_structured_mesh(4, 4).unwrap();
        let all: Vec<usize> = (0..mesh.n_triangles()).collect();
        let rep = coverage_diagnostics(&from_cells(&mesh, vec![all.clone(), all]), &mesh);
        assert_eq!(rep.c_ov, 2);
        assert_eq!(rep.delta, 0.0);
        assert!((rep.lambda_max_overlap - 2.0).abs() < 1e-12);
    }

    #[test]
    fn strip_chain_by_hand() {
        // 4x1 strip of squares scaled into the unit square (h = 1/4 wide,
        // 1 high); triangles T0..T7 left to right.
        let mesh = build_structured_mesh(4, 1).unwrap();
        let nb = from_cells(&mesh, vec![vec![0, 1, 2], vec![2, 3, 4, 5], vec![5, 6, 7]]);
        let rep = coverage_diagnostics(&nb, &mesh);
        assert!(rep.covered);
        assert_eq!(rep.c_ov, 2);
        // Exclusive cells sit one third of a cell width from the nearest
        // interior edge of their neighborhood.
        assert!((rep.delta - 0.25 / 3.0).abs() < 1e-12, "{}", rep.delta);
        // Overlap pattern is a path of length 3: 1 + √2.
        assert!((rep.lambda_max_overlap - (1.0 + 2f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn overlap_spectra() {
        let mesh = build_structured_mesh(5, 5).unwrap();
        let disjoint = from_cells(&mesh, (0..5).map(|k| vec![2 * k]).collect());
        assert!((overlap_spectral_bound(&disjoint) - 1.0).abs() < 1e-12);
        let clique = from_cells(&mesh, (0..4).map(|k| vec![0, 10 + k]).collect());
        assert!((overlap_spectral_bound(&clique) - 4.0).abs() < 1e-12);
        // Path of five: consecutive sets share one cell.
        let path = from_cells(&mesh, (0..5).map(|k| vec![k, k + 1]).collect());
        let expect = 1.0 + 2.0 * (std::f64::consts::PI / 6.0).cos();
        assert!((overlap_spectral_bound(&path) - expect).abs() < 1e-10);
        let rep = coverage_diagnostics(&path, &mesh);
        assert_eq!(rep.c_ov, 2);
        // The path exceeds its cell multiplicity.
        assert!(!rep.overlap_bound_holds());
    }
}

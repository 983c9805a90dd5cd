use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FineMesh, NodalKind, NodalVector};

/// Lloyd iterations stop once no point moves farther than this.
pub const LLOYD_TOL: f64 = 1e-6;

/// Where a coarse point is allowed to move during Lloyd updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointConstraint {
    Free,
    /// Fixed at a corner of the square.
    Corner,
    /// On `x = 0` or `x = 1`; only `y` moves.
    VerticalEdge,
    /// On `y = 0` or `y = 1`; only `x` moves.
    HorizontalEdge,
}

/// Initial layout of the Lloyd iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CloudInit {
    /// ⌈√N⌉×⌈√N⌉ jittered grid including the boundary lines; boundary points
    /// stay on their edge.
    #[default]
    WithBoundary,
    /// Cell-centred jittered grid, every point free.
    InteriorOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<[f64; 2]>,
    pub constraints: Vec<PointConstraint>,
    /// Empty until radii are assigned.
    pub radii: Vec<f64>,
    pub seed: u64,
    /// Set together with the radii.
    pub gamma: Option<f64>,
    /// Lloyd sweeps performed.
    pub iterations: usize,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Assign `r_i = γ · d_i`.
    pub fn with_radii(mut self, gamma: f64) -> Result<Self> {
        self.radii = compute_radii(&self, gamma)?;
        self.gamma = Some(gamma);
        Ok(self)
    }
}

pub fn generate_point_cloud(
    density: &NodalVector,
    mesh: &FineMesh,
    n_points: usize,
    seed: u64,
    max_iters: usize,
) -> Result<PointCloud> {
    generate_point_cloud_with(density, mesh, n_points, seed, max_iters, CloudInit::WithBoundary)
}

/// Discrete weighted Lloyd iteration over fine-cell centroids with weights
/// `ρ̄_K |K|`, `ρ̄_K` the mean nodal density of the cell.
pub fn generate_point_cloud_with(
    density: &NodalVector,
    mesh: &FineMesh,
    n_points: usize,
    seed: u64,
    max_iters: usize,
    init: CloudInit,
) -> Result<PointCloud> {
    if n_points == 0 {
        return Err(Error::input("point cloud needs at least one point"));
    }
    if n_points > mesh.n_triangles() {
        return Err(Error::input(format!(
            "{n_points} points exceed the {} fine cells",
            mesh.n_triangles()
        )));
    }
    if density.kind() != NodalKind::Full || density.len() != mesh.n_vertices() {
        return Err(Error::input("density must be a full-length nodal vector"));
    }
    let centroids: Vec<[f64; 2]> = (0..mesh.n_triangles()).map(|t| mesh.centroid(t)).collect();
    let weights: Vec<f64> = mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let rho = tri.iter().map(|&v| density.values()[v]).sum::<f64>() / 3.0;
            rho * mesh.signed_area(t)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut points, constraints) = initial_layout(n_points, init, &mut rng);

    let mut owner = vec![0usize; centroids.len()];
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        for (c, o) in centroids.iter().zip(owner.iter_mut()) {
            *o = nearest(&points, *c);
        }
        let mut acc = vec![[0.0f64; 3]; n_points];
        for ((c, &w), &o) in centroids.iter().zip(&weights).zip(&owner) {
            acc[o][0] += w * c[0];
            acc[o][1] += w * c[1];
            acc[o][2] += w;
        }
        let mut moved: f64 = 0.0;
        for ((p, a), con) in points.iter_mut().zip(&acc).zip(&constraints) {
            if a[2] <= 0.0 {
                continue;
            }
            let target = [a[0] / a[2], a[1] / a[2]];
            let next = match con {
                PointConstraint::Free => target,
                PointConstraint::Corner => *p,
                PointConstraint::VerticalEdge => [p[0], target[1].clamp(0.0, 1.0)],
                PointConstraint::HorizontalEdge => [target[0].clamp(0.0, 1.0), p[1]],
            };
            moved = moved.max((next[0] - p[0]).hypot(next[1] - p[1]));
            *p = next;
        }
        if moved < LLOYD_TOL {
            break;
        }
    }
    Ok(PointCloud {
        points,
        constraints,
        radii: Vec::new(),
        seed,
        gamma: None,
        iterations,
    })
}

/// Index of the point nearest `x` (lowest index on ties).
pub(crate) fn nearest(points: &[[f64; 2]], x: [f64; 2]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn initial_layout(
    n: usize,
    init: CloudInit,
    rng: &mut ChaCha8Rng,
) -> (Vec<[f64; 2]>, Vec<PointConstraint>) {
    let g = (n as f64).sqrt().ceil() as usize;
    let mut pts = Vec::with_capacity(g * g);
    match init {
        CloudInit::InteriorOnly => {
            let h = 1.0 / g as f64;
            for j in 0..g {
                for i in 0..g {
                    let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(-0.25..0.25) * h;
                    let x = (i as f64 + 0.5) * h + jitter(rng);
                    let y = (j as f64 + 0.5) * h + jitter(rng);
                    pts.push(([x, y], PointConstraint::Free));
                }
            }
        }
        CloudInit::WithBoundary if g == 1 => pts.push(([0.5, 0.5], PointConstraint::Free)),
        CloudInit::WithBoundary => {
            let h = 1.0 / (g - 1) as f64;
            for j in 0..g {
                for i in 0..g {
                    let on_x = i == 0 || i == g - 1;
                    let on_y = j == 0 || j == g - 1;
                    let mut x = i as f64 * h;
                    let mut y = j as f64 * h;
                    let con = match (on_x, on_y) {
                        (true, true) => PointConstraint::Corner,
                        (true, false) => {
                            y += rng.gen_range(-0.25..0.25) * h;
                            PointConstraint::VerticalEdge
                        }
                        (false, true) => {
                            x += rng.gen_range(-0.25..0.25) * h;
                            PointConstraint::HorizontalEdge
                        }
                        (false, false) => {
                            x += rng.gen_range(-0.25..0.25) * h;
                            y += rng.gen_range(-0.25..0.25) * h;
                            PointConstraint::Free
                        }
                    };
                    pts.push(([x, y], con));
                }
            }
        }
    }
    // Surplus grid points are removed from the free ones first.
    let surplus = pts.len() - n;
    if surplus > 0 {
        let mut free: Vec<usize> = (0..pts.len())
            .filter(|&k| pts[k].1 == PointConstraint::Free)
            .collect();
        let mut fixed: Vec<usize> = (0..pts.len())
            .filter(|&k| pts[k].1 != PointConstraint::Free)
            .collect();
        free.shuffle(rng);
        fixed.shuffle(rng);
        let mut drop: Vec<usize> = free.into_iter().chain(fixed).take(surplus).collect();
        drop.sort_unstable();
        for k in drop.into_iter().rev() {
            pts.remove(k);
        }
    }
    pts.into_iter().unzip()
}

/// `r_i = γ · min_{j≠i} ‖x_i − x_j‖`.
pub fn compute_radii(cloud: &PointCloud, gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 1.0) {
        return Err(Error::input(format!(
            "gamma must exceed 1 for the neighborhoods to cover the domain, got {gamma}"
        )));
    }
    let pts = &cloud.points;
    if pts.len() < 2 {
        return Err(Error::input("radii need at least two points"));
    }
    let mut radii = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let d = pts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
            .fold(f64::INFINITY, f64::min);
        if !(d > 0.0) {
            return Err(Error::input(format!("point {i} coincides with another point")));
        }
        radii.push(gamma * d);
    }
    Ok(radii)
}

//! Fine backward Euler reference and the two coarse integrators.
//!
//! All fine-scale vectors are reduced (interior DOFs). Sources satisfy
//! `f(0) = 0`, so with homogeneous Dirichlet data the group-FEM load on the
//! interior is `b(p) = M f(p)` with `M` the reduced unit mass matrix.

mod coarse;
mod fine;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FineMesh, NodalKind, NodalVector};
use crate::linalg::SparseMatrix;

pub use coarse::{
    coarse_pencil_eig, mfgmsfem_ei_run, mfgmsfem_fd_run, project_initial, CoarseOperator,
};
pub use fine::fine_backward_euler;

/// Uniform grid `t_n = nτ`, `n = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub tau: f64,
    pub n_steps: usize,
    pub t_max: f64,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() || n_steps == 0 {
            return Err(Error::input(format!(
                "time grid needs t_max > 0 and at least one step (t_max = {t_max}, n_steps = {n_steps})"
            )));
        }
        Ok(Self {
            tau: t_max / n_steps as f64,
            n_steps,
            t_max,
        })
    }
}

/// Right-hand side nonlinearity `f(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// `f = 0`
    #[default]
    Zero,
    /// `f(p) = −p(1 − p)(1 + p)`
    Cubic,
}

impl Source {
    pub fn eval(self, p: f64) -> f64 {
        match self {
            Source::Zero => 0.0,
            Source::Cubic => -p * (1.0 - p) * (1.0 + p),
        }
    }

    pub fn is_zero(self) -> bool {
        self == Source::Zero
    }

    /// Group-FEM load `b(p) = M f(p)`; `None` for the zero source.
    pub(crate) fn load(self, m: &SparseMatrix, p: &[f64]) -> Option<Vec<f64>> {
        if self.is_zero() {
            return None;
        }
        let f: Vec<f64> = p.iter().map(|&x| self.eval(x)).collect();
        Some(m.mul_vec(&f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Fixed-point sweeps on the nonlinear load per implicit step; 1 lags
    /// the load at the previous state.
    pub picard: usize,
    /// Steps (1-based, `≤ n_steps`) whose states are recorded.
    pub snapshots: Vec<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            picard: 1,
            snapshots: Vec::new(),
        }
    }
}

impl RunOptions {
    fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if self.picard == 0 {
            return Err(Error::input("picard count must be at least 1"));
        }
        if let Some(&s) = self.snapshots.iter().find(|&&s| s == 0 || s > grid.n_steps) {
            return Err(Error::input(format!(
                "snapshot step {s} outside 1..={}",
                grid.n_steps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub steps: usize,
    pub wall_time: Duration,
    /// Dimension of the evolved system.
    pub dim: usize,
    pub factorizations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    /// Reduced fine-scale state at `t_max`.
    pub final_state: Vec<f64>,
    /// Coarse coordinates at `t_max` for the multiscale integrators.
    pub coarse_final: Option<Vec<f64>>,
    /// `(step, reduced state)` in the requested order.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn final_nodal(&self, mesh: &FineMesh) -> Result<NodalVector> {
        NodalVector::reduced(mesh, self.final_state.clone())
    }
}

/// Reduced values of `p0` after checking its layout against `n`.
fn reduced_values(p0: &NodalVector, n: usize) -> Result<&[f64]> {
    if p0.kind() != NodalKind::Reduced || p0.len() != n {
        return Err(Error::input(format!(
            "initial state must be a reduced nodal vector of length {n} (got {:?}, length {})",
            p0.kind(),
            p0.len()
        )));
    }
    Ok(p0.values())
}

fn check_square(name: &str, x: &SparseMatrix, n: usize) -> Result<()> {
    if x.n_rows() != n || x.n_cols() != n {
        return Err(Error::input(format!(
            "{name} is {}x{}, expected {n}x{n}",
            x.n_rows(),
            x.n_cols()
        )));
    }
    Ok(())
}

/// Collects requested snapshots while stepping.
struct Recorder<'a> {
    wanted: &'a [usize],
    out: Vec<Option<Vec<f64>>>,
}

impl<'a> Recorder<'a> {
    fn new(wanted: &'a [usize]) -> Self {
        Self {
            wanted,
            out: vec![None; wanted.len()],
        }
    }

    fn record(&mut self, step: usize, state: impl Fn() -> Vec<f64>) {
        let mut cached: Option<Vec<f64>> = None;
        for (slot, &s) in self.out.iter_mut().zip(self.wanted) {
            if s == step {
                *slot = Some(cached.get_or_insert_with(&state).clone());
            }
        }
    }

    fn finish(self) -> Vec<(usize, Vec<f64>)> {
        self.wanted
            .iter()
            .copied()
            .zip(self.out.into_iter().map(|s| s.unwrap_or_default()))
            .collect()
    }
}

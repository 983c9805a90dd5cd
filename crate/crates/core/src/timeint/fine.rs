use std::time::Instant;

use super::{check_square, reduced_values, Recorder, RunOptions, SolveResult, SolveStats, Source, TimeGrid};
use crate::error::{Error, Result};
use crate::fem::NodalVector;
use crate::linalg::{SparseCholesky, SparseMatrix};

/// Backward Euler `(M + τA) pⁿ = M pⁿ⁻¹ + τ b(p̃)` with `p̃` the previous
/// state refined by `opts.picard − 1` fixed-point sweeps. `M + τA` is
/// factored once.
pub fn fine_backward_euler(
    m: &SparseMatrix,
    a: &SparseMatrix,
    source: Source,
    p0: &NodalVector,
    grid: &TimeGrid,
    opts: &RunOptions,
) -> Result<SolveResult> {
    let start = Instant::now();
    let n = m.n_rows();
    check_square("mass matrix", m, n)?;
    check_square("stiffness matrix", a, n)?;
    opts.validate(grid)?;
    let mut p = reduced_values(p0, n)?.to_vec();
    let tau = grid.tau;
    let k = SparseCholesky::factor(&m.add_scaled(1.0, a, tau)?)
        .map_err(|e| e.context("factoring M + τA"))?;
    let mut rec = Recorder::new(&opts.snapshots);
    for step in 1..=grid.n_steps {
        let mp = m.mul_vec(&p);
        let mut iterate = p.clone();
        let sweeps = if source.is_zero() { 1 } else { opts.picard };
        for _ in 0..sweeps {
            let mut rhs = mp.clone();
            if let Some(b) = source.load(m, &iterate) {
                for (r, bi) in rhs.iter_mut().zip(b) {
                    *r += tau * bi;
                }
            }
            k.solve_in_place(&mut rhs);
            iterate = rhs;
        }
        if iterate.iter().any(|v| !v.is_finite()) {
            return Err(Error::Step {
                step,
                source: Box::new(Error::Solver {
                    message: "non-finite state".into(),
                    residual: f64::NAN,
                }),
            });
        }
        p = iterate;
        rec.record(step, || p.clone());
    }
    Ok(SolveResult {
        final_state: p,
        coarse_final: None,
        snapshots: rec.finish(),
        stats: SolveStats {
            steps: grid.n_steps,
            wall_time: start.elapsed(),
            dim: n,
            factorizations: 1,
        },
    })
}

//! Fixtures shared by the kernel benchmarks.

use msflow::experiments::{build_cover, build_point_cloud, ExperimentConfig, Problem};
use msflow::coarsening::Neighborhoods;

/// Linear-case problem on an `n x n` mesh; channels generated with the
/// shipped linear raster's parameters when `n` divides 100.
pub fn config(n: usize, n_points: usize) -> ExperimentConfig {
    let perm = if 100 % n == 0 {
        r#"{"kind": "generator", "horizontal_channels": 2, "vertical_channels": 1, "inclusions": 4, "channel_length": 0.8, "seed": 7}"#
    } else {
        r#"{"kind": "uniform", "value": 1}"#
    };
    ExperimentConfig::from_json(&format!(
        r#"{{"mesh": {{"nx": {n}, "ny": {n}}}, "n_points": {n_points}, "permeability": {perm}}}"#
    ))
    .expect("bench config")
}

pub fn problem(cfg: &ExperimentConfig) -> Problem {
    Problem::from_config(cfg).expect("bench problem")
}

pub fn neighborhoods(problem: &Problem, cfg: &ExperimentConfig, gamma: f64) -> Neighborhoods {
    let cloud = build_point_cloud(problem, cfg).expect("bench cloud");
    build_cover(problem, &cloud, gamma).expect("bench cover").1
}

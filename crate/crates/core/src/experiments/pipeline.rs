use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, InitialCondition, Model, PermeabilitySource};
use super::permeability::{builtin_raster, generate_permeability, load_permeability, parse_raster};
use crate::coarsening::{
    build_neighborhoods, compute_density, coverage_diagnostics, generate_point_cloud, CoverReport,
    Neighborhoods, PointCloud,
};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, assemble_stiffness, build_structured_mesh, FineMesh, MassWeight,
    NodalVector, PermeabilityField, WeightedNorms,
};
use crate::linalg::{EigenPencilDecomp, SparseMatrix};
use crate::msbasis::{
    build_multiscale_space, coarse_matrices, local_spectral_bases, shape_functions, LocalEigenBasis,
    MultiscaleSpace, ShapeValues,
};
use crate::timeint::{fine_backward_euler, CoarseOperator, RunOptions, SolveResult, SolveStats, Source, TimeGrid};

/// Fine-scale data shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: FineMesh,
    pub kappa: PermeabilityField,
    pub source: Source,
    pub initial: InitialCondition,
    /// Reduced unit mass matrix.
    pub mass: SparseMatrix,
    /// Reduced κ-stiffness matrix.
    pub stiffness: SparseMatrix,
    pub norms: WeightedNorms,
    /// Full-length initial condition.
    pub p0_full: NodalVector,
    /// Reduced initial condition.
    pub p0: NodalVector,
}

impl Problem {
    pub fn new(mesh: FineMesh, kappa: PermeabilityField, source: Source, initial: InitialCondition) -> Result<Self> {
        let kappa = kappa.for_mesh(&mesh)?;
        let idx = mesh.interior_nodes().to_vec();
        let mass = assemble_mass(&mesh, MassWeight::Unit)?.principal_submatrix(&idx);
        let stiffness = assemble_stiffness(&mesh, &kappa)?.principal_submatrix(&idx);
        let norms = WeightedNorms::new(&mesh, &kappa)?;
        let p0_full = NodalVector::from_fn(&mesh, |x, y| initial.eval(x, y));
        let p0 = p0_full.to_reduced(&mesh);
        Ok(Self {
            mesh,
            kappa,
            source,
            initial,
            mass,
            stiffness,
            norms,
            p0_full,
            p0,
        })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let mesh = build_structured_mesh(cfg.mesh.nx, cfg.mesh.ny)?;
        let kappa = resolve_permeability(cfg, &mesh)?;
        Self::new(mesh, kappa, cfg.model.source(), cfg.initial)
    }

    /// Reduced values extended by the zero boundary data.
    pub fn to_full(&self, reduced: &[f64]) -> Result<NodalVector> {
        Ok(NodalVector::reduced(&self.mesh, reduced.to_vec())?.to_full(&self.mesh))
    }

    /// Relative κ-weighted (L², H¹) errors in percent.
    pub fn relative_errors(&self, approx: &[f64], reference: &[f64]) -> Result<(f64, f64)> {
        let a = self.to_full(approx)?;
        let r = self.to_full(reference)?;
        self.norms.relative_percent(a.values(), r.values())
    }
}

pub fn resolve_permeability(cfg: &ExperimentConfig, mesh: &FineMesh) -> Result<PermeabilityField> {
    let default = PermeabilitySource::Builtin {
        name: match cfg.model {
            Model::Linear => super::config::BuiltinField::Linear,
            Model::Semilinear => super::config::BuiltinField::Semilinear,
        },
    };
    // An unusable field is a problem with the config, not with the numerics.
    match cfg.permeability.as_ref().unwrap_or(&default) {
        PermeabilitySource::Builtin { name } => parse_raster(builtin_raster(*name), mesh),
        PermeabilitySource::Raster { path } => load_permeability(path, mesh),
        PermeabilitySource::Generator(spec) => generate_permeability(spec, mesh, cfg.contrast, cfg.seed),
        PermeabilitySource::Uniform { value } => PermeabilityField::uniform(mesh, *value),
    }
    .map_err(|e| Error::config("permeability", e.to_string()))
}

/// Density-weighted Lloyd point cloud (no radii yet).
pub fn build_point_cloud(problem: &Problem, cfg: &ExperimentConfig) -> Result<PointCloud> {
    let density = compute_density(&problem.mesh, &problem.kappa, &problem.p0_full, cfg.beta)?;
    generate_point_cloud(&density, &problem.mesh, cfg.n_points, cfg.seed, cfg.lloyd_max_iters)
}

/// Everything that depends on γ: neighborhoods, partition of unity and the
/// local bases with the largest retained count.
#[derive(Debug, Clone)]
pub struct CoarseLevel {
    pub gamma: f64,
    pub cloud: PointCloud,
    pub neighborhoods: Neighborhoods,
    pub cover: CoverReport,
    pub shapes: ShapeValues,
    pub bases: Vec<LocalEigenBasis>,
    pub space: MultiscaleSpace,
    pub m0: SparseMatrix,
    pub a0: SparseMatrix,
}

/// Cover without local eigensolves.
pub fn build_cover(problem: &Problem, cloud: &PointCloud, gamma: f64) -> Result<(PointCloud, Neighborhoods, CoverReport)> {
    let cloud = cloud.clone().with_radii(gamma)?;
    let neighborhoods = build_neighborhoods(&problem.mesh, &cloud)?;
    let cover = coverage_diagnostics(&neighborhoods, &problem.mesh);
    Ok((cloud, neighborhoods, cover))
}

pub fn build_coarse_level(problem: &Problem, cloud: &PointCloud, gamma: f64, max_m: usize) -> Result<CoarseLevel> {
    let (cloud, neighborhoods, cover) = build_cover(problem, cloud, gamma)?;
    let shapes = shape_functions(&cloud, &neighborhoods, &problem.mesh)?;
    let bases = local_spectral_bases(&neighborhoods, &problem.mesh, &problem.kappa, max_m)?;
    let space = build_multiscale_space(&bases, &shapes, &neighborhoods, &problem.mesh)?;
    let (m0, a0) = coarse_matrices(&space, &problem.mass, &problem.stiffness)?;
    Ok(CoarseLevel {
        gamma,
        cloud,
        neighborhoods,
        cover,
        shapes,
        bases,
        space,
        m0,
        a0,
    })
}

impl CoarseLevel {
    /// Local bases truncated to `m` retained modes.
    pub fn bases_for(&self, m: usize) -> Result<Vec<LocalEigenBasis>> {
        self.bases.iter().map(|b| b.truncated(m)).collect()
    }

    /// Coarse operator of the space with `m` modes per neighborhood; its
    /// matrices are principal submatrices of the full level's.
    pub fn operator(&self, m: usize) -> Result<CoarseOperator> {
        let (space, rows) = self.space.truncated(m)?;
        CoarseOperator::from_parts(space, self.m0.principal_submatrix(&rows), self.a0.principal_submatrix(&rows))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fd,
    Ei,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fd => "fd",
            Method::Ei => "ei",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Rows `(M, γ)` at a fixed step count.
    Gamma,
    /// Rows `(M, N_t)` at a fixed γ.
    Nt,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Gamma => "gamma",
            SweepKind::Nt => "nt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub m: usize,
    pub param: f64,
    pub l2_percent: f64,
    pub h1_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub method: Method,
    pub kind: SweepKind,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn file_name(&self) -> String {
        format!("errors_{}_{}.csv", self.method.name(), self.kind.name())
    }

    pub fn get(&self, m: usize, param: f64) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.m == m && r.param == param)
    }
}

/// FD and EI final states for one operator and step count.
pub fn run_both(
    problem: &Problem,
    op: &CoarseOperator,
    decomp: &EigenPencilDecomp,
    grid: &TimeGrid,
    opts: &RunOptions,
) -> Result<(SolveResult, SolveResult)> {
    let fd = op.fd_run(&problem.mass, &problem.stiffness, problem.source, &problem.p0, grid, opts)?;
    let ei = op.ei_run(decomp, &problem.mass, &problem.stiffness, problem.source, &problem.p0, grid, opts)?;
    Ok((fd, ei))
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub tables: Vec<ErrorTable>,
    /// Reduced final states at `(fixed_gamma, field_m, fixed_n_t)`.
    pub fields: Vec<(Method, Vec<f64>)>,
    pub diagnostics: Vec<GammaDiagnostics>,
}

impl SweepOutput {
    pub fn table(&self, method: Method, kind: SweepKind) -> Option<&ErrorTable> {
        self.tables.iter().find(|t| t.method == method && t.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaDiagnostics {
    pub gamma: f64,
    #[serde(rename = "C_ov")]
    pub c_ov: usize,
    pub delta: f64,
    pub lambda_max_overlap: f64,
    pub covered: bool,
    pub repair_rounds: usize,
}

impl GammaDiagnostics {
    pub fn new(gamma: f64, nb: &Neighborhoods, r: &CoverReport) -> Self {
        Self {
            gamma,
            c_ov: r.c_ov,
            delta: r.delta,
            lambda_max_overlap: r.lambda_max_overlap,
            covered: r.covered,
            repair_rounds: nb.repair_rounds,
        }
    }
}

/// Cover diagnostics for every γ of the config.
pub fn run_diagnostics(problem: &Problem, cfg: &ExperimentConfig) -> Result<Vec<GammaDiagnostics>> {
    let cloud = build_point_cloud(problem, cfg)?;
    cfg.all_gammas()
        .into_iter()
        .map(|g| {
            let (_, nb, rep) = build_cover(problem, &cloud, g)?;
            Ok(GammaDiagnostics::new(g, &nb, &rep))
        })
        .collect()
}

type RunKey = (usize, usize, usize); // (γ index, M, N_t)

/// Error tables over `(M, γ)` at `fixed_n_t` and `(M, N_t)` at
/// `fixed_gamma` for both coarse integrators, against `reference`.
pub fn run_sweep_with(problem: &Problem, cfg: &ExperimentConfig, reference: &[f64]) -> Result<SweepOutput> {
    if reference.len() != problem.mesh.n_interior() {
        return Err(Error::input("reference state does not match the mesh"));
    }
    let cloud = build_point_cloud(problem, cfg)?;
    let gammas = cfg.all_gammas();
    let opts = RunOptions {
        picard: cfg.picard,
        snapshots: Vec::new(),
    };
    let mut errors: BTreeMap<(Method, RunKey), (f64, f64)> = BTreeMap::new();
    let mut fields = Vec::new();
    let mut diagnostics = Vec::new();
    for (gi, &gamma) in gammas.iter().enumerate() {
        let in_gamma_table = cfg.gamma.contains(&gamma);
        let is_fixed = gamma == cfg.fixed_gamma;
        let mut ms: Vec<usize> = cfg.m.clone();
        if is_fixed {
            ms.push(cfg.field_m);
        }
        ms.sort_unstable();
        ms.dedup();
        let level = build_coarse_level(problem, &cloud, gamma, cfg.max_m())
            .map_err(|e| e.context(format!("coarse level at gamma = {gamma}")))?;
        diagnostics.push(GammaDiagnostics::new(gamma, &level.neighborhoods, &level.cover));
        log::info!(
            "gamma = {gamma}: {} neighborhoods, coarse dimension {} at M = {}",
            level.neighborhoods.len(),
            level.space.dim(),
            cfg.max_m()
        );
        let results: Vec<Result<Vec<((Method, RunKey), (f64, f64), Option<Vec<f64>>)>>> = ms
            .par_iter()
            .map(|&m| {
                let ctx = |method: &str, n_t: usize| format!("{method} run with M = {m}, gamma = {gamma}, N_t = {n_t}");
                let mut steps = Vec::new();
                if in_gamma_table && cfg.m.contains(&m) {
                    steps.push(cfg.fixed_n_t);
                }
                if is_fixed && cfg.m.contains(&m) {
                    steps.extend(&cfg.n_t);
                }
                let want_field = is_fixed && m == cfg.field_m;
                if want_field {
                    steps.push(cfg.fixed_n_t);
                }
                steps.sort_unstable();
                steps.dedup();
                let op = level.operator(m).map_err(|e| e.context(format!("coarse operator for M = {m}")))?;
                let decomp = op.pencil(cfg.t_max / cfg.fixed_n_t as f64)?;
                let mut out = Vec::new();
                for n_t in steps {
                    let grid = TimeGrid::new(cfg.t_max, n_t)?;
                    let fd = op
                        .fd_run(&problem.mass, &problem.stiffness, problem.source, &problem.p0, &grid, &opts)
                        .map_err(|e| e.context(ctx("FD", n_t)))?;
                    let ei = op
                        .ei_run(&decomp, &problem.mass, &problem.stiffness, problem.source, &problem.p0, &grid, &opts)
                        .map_err(|e| e.context(ctx("EI", n_t)))?;
                    for (method, r) in [(Method::Fd, fd), (Method::Ei, ei)] {
                        let err = problem.relative_errors(&r.final_state, reference)?;
                        let field = (want_field && n_t == cfg.fixed_n_t).then_some(r.final_state);
                        out.push(((method, (gi, m, n_t)), err, field));
                    }
                }
                Ok(out)
            })
            .collect();
        for r in results {
            for (key, err, field) in r? {
                errors.insert(key, err);
                if let Some(f) = field {
                    fields.push((key.0, f));
                }
            }
        }
    }
    fields.sort_by_key(|(m, _)| *m);

    let mut tables = Vec::new();
    for method in [Method::Fd, Method::Ei] {
        let mut gamma_rows = Vec::new();
        for &m in &cfg.m {
            for &g in &cfg.gamma {
                let gi = gammas.iter().position(|&x| x == g).expect("gamma listed");
                let (l2, h1) = errors[&(method, (gi, m, cfg.fixed_n_t))];
                gamma_rows.push(ErrorRow { m, param: g, l2_percent: l2, h1_percent: h1 });
            }
        }
        let gi = gammas.iter().position(|&x| x == cfg.fixed_gamma).expect("fixed gamma listed");
        let mut nt_rows = Vec::new();
        for &m in &cfg.m {
            for &n_t in &cfg.n_t {
                let (l2, h1) = errors[&(method, (gi, m, n_t))];
                nt_rows.push(ErrorRow { m, param: n_t as f64, l2_percent: l2, h1_percent: h1 });
            }
        }
        for (kind, mut rows) in [(SweepKind::Gamma, gamma_rows), (SweepKind::Nt, nt_rows)] {
            rows.sort_by(|a, b| a.m.cmp(&b.m).then(a.param.total_cmp(&b.param)));
            rows.dedup_by(|a, b| a.m == b.m && a.param == b.param);
            tables.push(ErrorTable { method, kind, rows });
        }
    }
    Ok(SweepOutput {
        tables,
        fields,
        diagnostics,
    })
}

/// Content hash of everything that determines the reference solution.
pub fn reference_key(problem: &Problem, n_t: usize, t_max: f64, picard: usize) -> String {
    let mut h = Sha256::new();
    h.update(b"msflow-reference-v1");
    h.update((problem.mesh.nx() as u64).to_le_bytes());
    h.update((problem.mesh.ny() as u64).to_le_bytes());
    for v in problem.kappa.values() {
        h.update(v.to_le_bytes());
    }
    h.update([problem.source as u8, problem.initial as u8]);
    h.update((n_t as u64).to_le_bytes());
    h.update(t_max.to_le_bytes());
    h.update((picard as u64).to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

const CACHE_MAGIC: &[u8; 8] = b"MSREF01\n";

fn read_cached(path: &Path, n: usize) -> Option<Vec<f64>> {
    let bytes = std::fs::read(path).ok()?;
    let body = bytes.strip_prefix(CACHE_MAGIC)?;
    if body.len() != 8 * n {
        log::warn!("ignoring reference cache {} of unexpected size", path.display());
        return None;
    }
    Some(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

fn write_cached(path: &Path, values: &[f64]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut buf = Vec::with_capacity(CACHE_MAGIC.len() + 8 * values.len());
    buf.extend_from_slice(CACHE_MAGIC);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Fine backward Euler reference at `cfg.reference_n_t` steps, read from or
/// stored in `cache_dir` when given.
pub fn reference_solution(problem: &Problem, cfg: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<SolveResult> {
    let n = problem.mesh.n_interior();
    let path: Option<PathBuf> = cache_dir.map(|d| {
        d.join(format!(
            "reference_{}.bin",
            reference_key(problem, cfg.reference_n_t, cfg.t_max, cfg.picard)
        ))
    });
    if let Some(values) = path.as_deref().and_then(|p| read_cached(p, n)) {
        log::info!("reference read from cache");
        return Ok(SolveResult {
            final_state: values,
            coarse_final: None,
            snapshots: Vec::new(),
            stats: SolveStats {
                steps: cfg.reference_n_t,
                dim: n,
                ..SolveStats::default()
            },
        });
    }
    let grid = TimeGrid::new(cfg.t_max, cfg.reference_n_t)?;
    let opts = RunOptions {
        picard: cfg.picard,
        snapshots: Vec::new(),
    };
    let r = fine_backward_euler(&problem.mass, &problem.stiffness, problem.source, &problem.p0, &grid, &opts)
        .map_err(|e| e.context("reference solve"))?;
    log::info!("reference: {} steps in {:.1?}", r.stats.steps, r.stats.wall_time);
    if let Some(p) = &path {
        write_cached(p, &r.final_state)?;
    }
    Ok(r)
}

fn cache_dir(cfg: &ExperimentConfig) -> Option<PathBuf> {
    cfg.output_dir.as_ref().map(|d| d.join("cache"))
}

/// Reference run for a config; cached under `<output_dir>/cache`.
pub fn run_reference(cfg: &ExperimentConfig) -> Result<SolveResult> {
    let problem = Problem::from_config(cfg)?;
    reference_solution(&problem, cfg, cache_dir(cfg).as_deref())
}

/// Full sweep for a config, computing or reusing the reference.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let problem = Problem::from_config(cfg)?;
    let reference = reference_solution(&problem, cfg, cache_dir(cfg).as_deref())?;
    run_sweep_with(&problem, cfg, &reference.final_state)
}

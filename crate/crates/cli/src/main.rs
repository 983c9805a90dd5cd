use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use msflow::experiments::{
    build_cover, build_point_cloud, export_cloud_csv, export_diag_json, export_field_vtk, export_table_csv,
    load_config, reference_solution, run_diagnostics, run_sweep_with, ExperimentConfig, Problem,
};
use msflow::{Error, NodalVector};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "msexp", version, about = "Multiscale parabolic flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fine-scale backward Euler reference; writes field_reference.vtk.
    Reference(Common),
    /// Error tables for both coarse integrators, final fields and diag.json.
    Sweep(Common),
    /// Point cloud with radii at the fixed gamma; writes cloud.csv.
    Pointcloud(Common),
    /// Cover diagnostics for every gamma; writes diag.json.
    Diag(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> msflow::Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = load_config(&self.config)?;
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .ok_or_else(|| Error::config("output_dir", "no output directory: pass --out or set output_dir"))?;
        cfg.output_dir = Some(out.clone());
        Ok((cfg, out))
    }
}

fn cache_dir(out: &Path) -> PathBuf {
    out.join("cache")
}

fn reference(c: &Common) -> msflow::Result<()> {
    let (cfg, out) = c.load()?;
    let problem = Problem::from_config(&cfg)?;
    let r = reference_solution(&problem, &cfg, Some(&cache_dir(&out)))?;
    let field = NodalVector::reduced(&problem.mesh, r.final_state)?;
    let path = out.join("field_reference.vtk");
    export_field_vtk(&field, &problem.kappa, &problem.mesh, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep(c: &Common) -> msflow::Result<()> {
    let (cfg, out) = c.load()?;
    let problem = Problem::from_config(&cfg)?;
    let reference = reference_solution(&problem, &cfg, Some(&cache_dir(&out)))?;
    let result = run_sweep_with(&problem, &cfg, &reference.final_state)?;
    for table in &result.tables {
        let path = out.join(table.file_name());
        export_table_csv(table, &path)?;
        println!("wrote {}", path.display());
    }
    for (method, state) in &result.fields {
        let field = NodalVector::reduced(&problem.mesh, state.clone())?;
        let path = out.join(format!("field_{}.vtk", method.name()));
        export_field_vtk(&field, &problem.kappa, &problem.mesh, &path)?;
        println!("wrote {}", path.display());
    }
    let path = out.join("diag.json");
    export_diag_json(&result.diagnostics, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn pointcloud(c: &Common) -> msflow::Result<()> {
    let (cfg, out) = c.load()?;
    let problem = Problem::from_config(&cfg)?;
    let cloud = build_point_cloud(&problem, &cfg)?;
    // Radii as used by the neighborhoods, coverage repair included.
    let (mut cloud, neighborhoods, _) = build_cover(&problem, &cloud, cfg.fixed_gamma)?;
    cloud.radii = neighborhoods.radii;
    let path = out.join("cloud.csv");
    export_cloud_csv(&cloud, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn diag(c: &Common) -> msflow::Result<()> {
    let (cfg, out) = c.load()?;
    let problem = Problem::from_config(&cfg)?;
    let diagnostics = run_diagnostics(&problem, &cfg)?;
    for d in &diagnostics {
        println!(
            "gamma {}: C_ov = {}, lambda_max = {:.6}, delta = {:.3e}, covered = {}",
            d.gamma, d.c_ov, d.lambda_max_overlap, d.delta, d.covered
        );
    }
    let path = out.join("diag.json");
    export_diag_json(&diagnostics, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Reference(c) => reference(c),
        Command::Sweep(c) => sweep(c),
        Command::Pointcloud(c) => pointcloud(c),
        Command::Diag(c) => diag(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.root_cause() {
                Error::Config { .. } => EXIT_CONFIG,
                Error::Io { .. } => EXIT_IO,
                _ => EXIT_NUMERICAL,
            })
        }
    }
}

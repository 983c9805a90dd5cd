use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
    "mesh": {"nx": 16, "ny": 16},
    "n_points": 9,
    "gamma": [2.5, 3],
    "m": [2, 3],
    "n_t": [5, 20],
    "fixed_n_t": 5,
    "field_m": 2,
    "reference_n_t": 200,
    "contrast": 100,
    "permeability": {"kind": "generator", "horizontal_channels": 2, "channel_width": 1, "channel_length": 0.7, "seed": 3}
}"#;

fn msexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msexp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("msexp runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run_in(dir: &Path, cmd: &str, config: &str) -> Output {
    let out = dir.join("out");
    msexp(&[cmd, "--config", config, "--out", out.to_str().unwrap()])
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn sweep_writes_every_artifact_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run_in(dir.path(), "sweep", &cfg);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let names = [
        "errors_fd_gamma.csv",
        "errors_ei_gamma.csv",
        "errors_fd_nt.csv",
        "errors_ei_nt.csv",
        "field_fd.vtk",
        "field_ei.vtk",
        "diag.json",
    ];
    let first: Vec<String> = names.iter().map(|n| read(&out.join(n))).collect();

    let ei = &first[1];
    let mut lines = ei.lines();
    assert_eq!(lines.next(), Some("M,param,L2_percent,H1_percent"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("2,2.5,"));
    for row in &rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 4);
        for v in &cols[2..] {
            assert_eq!(v.split('.').nth(1).map(str::len), Some(3), "{row}");
            assert!(v.parse::<f64>().unwrap() >= 0.0);
        }
    }
    let nt = read(&out.join("errors_fd_nt.csv"));
    assert!(nt.lines().nth(1).unwrap().starts_with("2,5,"), "{nt}");

    let diag: serde_json::Value = serde_json::from_str(&first[6]).unwrap();
    assert_eq!(diag.as_array().unwrap().len(), 2);
    for d in diag.as_array().unwrap() {
        for key in ["gamma", "C_ov", "delta", "lambda_max_overlap", "covered"] {
            assert!(d.get(key).is_some(), "missing {key}");
        }
    }
    assert!(first[4].contains("SCALARS pressure double 1"));
    assert!(first[4].contains("SCALARS kappa double 1"));
    assert!(out.join("cache").read_dir().unwrap().count() == 1);

    // A second run reuses the cached reference and reproduces every byte.
    let o = run_in(dir.path(), "sweep", &cfg);
    assert!(o.status.success());
    for (n, before) in names.iter().zip(&first) {
        assert_eq!(&read(&out.join(n)), before, "{n} changed");
    }
}

#[test]
fn reference_pointcloud_and_diag_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");

    let o = run_in(dir.path(), "reference", &cfg);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let vtk = read(&out.join("field_reference.vtk"));
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(vtk.contains("POINTS 289 double"));
    assert!(vtk.contains("CELLS 512 2048"));

    let o = run_in(dir.path(), "pointcloud", &cfg);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cloud = read(&out.join("cloud.csv"));
    let mut lines = cloud.lines();
    assert_eq!(lines.next(), Some("x,y,r"));
    let pts: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(pts.len(), 9);
    for p in &pts {
        assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        assert!(p[2] > 0.0);
    }

    let o = run_in(dir.path(), "diag", &cfg);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let diag: serde_json::Value = serde_json::from_str(&read(&out.join("diag.json"))).unwrap();
    let gammas: Vec<f64> = diag.as_array().unwrap().iter().map(|d| d["gamma"].as_f64().unwrap()).collect();
    assert_eq!(gammas, vec![2.5, 3.0]);
    assert!(diag[0]["covered"].as_bool().unwrap());
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_gamma = write_config(dir.path(), r#"{"mesh": {"nx": 8, "ny": 8}, "n_points": 4, "gamma": 1}"#);
    let o = run_in(dir.path(), "diag", &bad_gamma);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));

    let unknown = write_config(dir.path(), r#"{"mesh": {"nx": 8, "ny": 8}, "n_points": 4, "colour": 1}"#);
    let o = run_in(dir.path(), "diag", &unknown);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let o = run_in(dir.path(), "diag", dir.path().join("absent.json").to_str().unwrap());
    assert_eq!(o.status.code(), Some(2));

    // The raster does not divide a 10x10 mesh.
    let raster = dir.path().join("k.txt");
    std::fs::write(&raster, "3 3\n1 1 1 1 1 1 1 1 1\n").unwrap();
    let text = format!(
        r#"{{"mesh": {{"nx": 10, "ny": 10}}, "n_points": 4, "permeability": {{"kind": "raster", "path": {:?}}}}}"#,
        raster.to_str().unwrap()
    );
    let o = run_in(dir.path(), "diag", &write_config(dir.path(), &text));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    // No output directory anywhere.
    let cfg = write_config(dir.path(), r#"{"mesh": {"nx": 8, "ny": 8}, "n_points": 4}"#);
    let o = msexp(&["diag", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_with_code_3() {
    // Valid config, but 50 points cannot be placed in 8 fine cells.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mesh": {"nx": 2, "ny": 2}, "n_points": 50, "permeability": {"kind": "uniform", "value": 1}}"#);
    let o = run_in(dir.path(), "pointcloud", &cfg);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn output_dir_from_config_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_config");
    let text = SMALL.replacen('{', &format!("{{\"output_dir\": {:?},", out.to_str().unwrap()), 1);
    let cfg = write_config(dir.path(), &text);
    let o = msexp(&["diag", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("diag.json").exists());
}

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contrast-homog"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"eps_grid": [], "delta_grid": []}"#);
    let out = dir.path().join("out");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("row,eps,delta,h1_error,uncorrected,P_l2,Q_l2,R_l2,aux_norm,grad_sup"));
    assert!(out.join("summary.json").exists());
}

#[test]
fn malformed_json_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", "{\n  \"eps_grid\": [0.125,,]\n}");
    let o = run(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn unknown_key_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"solver": {"tolerance": 1e-8}}"#);
    let o = run(&["rate-eps", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("solver.tolerance"));
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(run(&["cell", "--delta", "abc"]).status.code(), Some(2));
    assert_eq!(run(&["cell", "--delta", "1", "--shape", "hexagon:0.2"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["cell", "--delta", "1", "--tol", "2"]).status.code(), Some(2));
}

#[test]
fn cell_record_has_expected_fields() {
    let o = run(&["cell", "--delta", "inf", "--n", "16"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["delta"], "inf");
    assert_eq!(v["A_hat"].as_array().unwrap().len(), 4);
    assert_eq!(v["chi_norms"].as_array().unwrap().len(), 2);
    assert!(v["mu1"].as_f64().unwrap() > 1.0);
}

#[test]
fn flux_record_and_cg_backend() {
    let o = run(&["flux", "--delta", "5", "--n", "16", "--solver", "cg", "--tol", "1e-11"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["F_l2", "Psi_l2", "div_residual", "skew_residual"] {
        assert!(v[key].is_number(), "{key}");
    }
    assert_eq!(v["skew_residual"], 0.0);
}

#[test]
fn np_spectrum_is_sorted_and_bounded() {
    let o = run(&["np-spectrum", "--n", "16"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let vals: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(!vals.is_empty());
    assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    assert!(vals.iter().all(|v| v.abs() < 0.5));
}

#[test]
fn mesh_dump_format() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("mesh.txt");
    let o = run(&["cell", "--delta", "2", "--n", "8", "--mesh-dump", p.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&p).unwrap();
    let head: Vec<usize> = text.lines().next().unwrap().split(' ').map(|t| t.parse().unwrap()).collect();
    assert_eq!(head[0], 2);
    assert_eq!(text.lines().count(), 1 + head[1] + head[2]);
    let last: Vec<&str> = text.lines().last().unwrap().split(' ').collect();
    assert_eq!(last.len(), 4);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"eps_grid": [0.25, 0.125], "delta_grid": [0.1, 10], "mesh": {"m_ref": 4}}"#);
    let mut bodies = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("o{k}"));
        let o = run(&["rate-eps", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        bodies.push(std::fs::read(out.join("runs.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let csv = String::from_utf8(bodies.remove(0)).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("run,")).count(), 4);
    assert_eq!(csv.lines().filter(|l| l.starts_with("slope,")).count(), 2);
}

#[test]
fn failed_assertion_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"eps_grid": [0.25, 0.125], "delta_grid": [1, 10], "mesh": {"m_ref": 4},
            "assertions": {"grid": true, "tolerances": {"delta_ratio_max": 1.0}}}"#,
    );
    let o = run(&["rate-eps", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL δ-uniformity"));
}

#[test]
fn criteria_from_config_write_acceptance_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"assertions": {"criteria": [5, 10]}}"#);
    let out = dir.path().join("o");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("acceptance.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")));
}

#[test]
fn bundled_acceptance_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(path).unwrap() {
        let p = entry.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        homog_core::experiments::RunConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

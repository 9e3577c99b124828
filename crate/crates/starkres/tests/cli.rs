use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn starkres(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starkres"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("STARKRES_THREADS")
        .output()
        .expect("driver runs")
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn field_free_dc_run_gives_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = starkres(&["dc", "--f", "0"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("resonances.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "f,re_z,im_z,residual,winding,trajectory_id");
    assert_eq!(lines.len(), 2);
    let cols: Vec<&str> = lines[1].split(',').collect();
    let re: f64 = cols[1].parse().unwrap();
    let im: f64 = cols[2].parse().unwrap();
    assert!((re - 1.01905).abs() < 1e-4 && (im + 0.0111115).abs() < 1e-4);
    assert_eq!(cols[4], "1");
    assert_eq!(cols[5], "");
    let m = manifest(dir.path());
    assert_eq!(m["mode"], "dc");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["parameters"]["root.tol"], 1e-10);
    assert_eq!(m["parameters"]["resolvent.gamma"], std::f64::consts::FRAC_PI_8);
}

#[test]
fn plot_renders_one_point_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    fs::write(
        &input,
        "f,re_z,im_z,residual,winding,trajectory_id\n0.05,1.0,-0.03,0,1,0\n0.02,1.01,-0.01,0,1,0\n0.01,0.99,-0.004,0,1,\n",
    )
    .unwrap();
    let out = starkres(&["plot", "--input", input.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = fs::read_to_string(dir.path().join("im_vs_f.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 3);
    assert!(svg.contains(">f</text>"));
    assert!(svg.contains(">Im z</text>"));
    assert!(dir.path().join("re_vs_f.svg").exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["dc", "--set", "dc.nonsense=1"],
        vec!["dc", "--f", "-0.5"],
        vec!["ac", "--omega", "0"],
        vec!["sweep", "--f-grid", "0.01,0.05"],
        vec!["dc", "--f", "0.01", "--method", "free-pole"],
        vec!["plot"],
    ] {
        let out = starkres(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = Command::new(env!("CARGO_BIN_EXE_starkres"))
        .args(["dc", "--out"])
        .arg(dir.path())
        .env("STARKRES_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failure_keeps_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = starkres(
        &["dc", "--f", "0.01", "--im-max", "-1e-6", "--set", "root.max_depth=0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("failures.log").exists());
    assert!(dir.path().join("resonances.csv").exists());
    assert_eq!(manifest(dir.path())["status"], "failed");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# field-free run\ndc.f=0.01\ndc.window.im_max=-1e-6\nroot.tol=1e-11\n").unwrap();
    let out = starkres(&["dc", "--config", cfg.to_str().unwrap(), "--f", "0"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["parameters"]["dc.f"], 0.0);
    assert_eq!(m["parameters"]["root.tol"], 1e-11);
    assert_eq!(m["parameters"]["dc.window.im_max"], -1e-6);
}

#[test]
fn ac_run_with_small_truncation_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("k.bin");
    let out = starkres(
        &[
            "ac",
            "--n-fourier",
            "2",
            "--n-hermite",
            "30",
            "--target",
            "1.019,-0.0111",
            "--dump-matrix",
            dump.to_str().unwrap(),
            "--set",
            "eigen.sensitivity=false",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let n = 5 * 32;
    assert_eq!(fs::metadata(&dump).unwrap().len() as usize, 24 + n * n * 16);
    let m = manifest(dir.path());
    assert_eq!(m["results"]["dimension"], n);
    let rows = fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);
    // no sensitivity estimate, so convergence cannot be claimed
    assert_eq!(m["flags"]["ac"], "inconclusive");
}

#[test]
fn integrand_dump_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let out = starkres(
        &["dc", "--f", "0.01", "--im-max", "-1e-6", "--integrand-samples", "50"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("integrand.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("re_t,im_t,re_value,im_value"));
    assert_eq!(text.lines().count(), 51);
}

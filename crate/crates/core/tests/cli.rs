use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ncpg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncpg")).args(args).current_dir(dir).output().expect("spawn ncpg")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("ncpg-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn empty_selection_passes_with_empty_report() {
    let d = scratch("empty");
    let cfg = write_config(&d, "suites.select =\n");
    let out = ncpg(&["verify", "--config", &cfg], &d);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v, Value::Array(vec![]));
}

#[test]
fn negative_tolerance_is_a_config_error() {
    let d = scratch("negtol");
    let cfg = write_config(&d, "tolerance.car.two_point_gamma = -1e-3\n");
    assert_eq!(ncpg(&["verify", "--config", &cfg], &d).status.code(), Some(2));
    assert_eq!(ncpg(&["verify", "--config", "missing.cfg"], &d).status.code(), Some(2));
    assert_eq!(ncpg(&["verify", "--suite", "nope"], &d).status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    let d = scratch("fail");
    let cfg = write_config(&d, "suites.select = car\ntolerance.car.six_point_matching = 0\n");
    let out = ncpg(&["verify", "--config", &cfg], &d);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = v.as_array().unwrap().iter().find(|c| c["check"] == "six_point_matching").unwrap();
    assert_eq!(row["status"], "fail");
    assert_eq!(row["tolerance"], 0.0);
}

#[test]
fn report_schema_and_determinism() {
    let d = scratch("det");
    let a = ncpg(&["verify", "--suite", "lp", "--suite", "car", "--seed", "11"], &d);
    let b = ncpg(&["verify", "--suite", "lp", "--suite", "car", "--seed", "11"], &d);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert!(!rows.is_empty());
    assert_eq!(rows[0]["suite"], "lp");
    for r in rows {
        let o = r.as_object().unwrap();
        let mut keys: Vec<&str> = o.keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["check", "measured", "status", "suite", "tolerance"]);
        assert!(["pass", "fail", "report"].contains(&r["status"].as_str().unwrap()));
    }
}

#[test]
fn norms_csv_is_seed_deterministic() {
    let d = scratch("norms");
    let a = ncpg(&["norms", "--seed", "5", "--out", "a"], &d);
    let b = ncpg(&["norms", "--seed", "5", "--out", "b"], &d);
    let c = ncpg(&["norms", "--seed", "6", "--out", "c"], &d);
    assert!(a.status.success() && b.status.success() && c.status.success());
    let fa = fs::read(d.join("a/norms.csv")).unwrap();
    assert_eq!(fa, fs::read(d.join("b/norms.csv")).unwrap());
    assert_ne!(fa, fs::read(d.join("c/norms.csv")).unwrap());
    let text = String::from_utf8(fa).unwrap();
    assert!(text.starts_with("sample,p,value,endpoint_max,interior_max,guard_ok\n"));
    assert_eq!(text.lines().count(), 1 + 8 * 6);
}

#[test]
fn single_point_phi4_scan() {
    let d = scratch("phi4one");
    let cfg = write_config(&d, "phi4.theta = 0.1\nphi4.tau = 0\nphi4.cutoffs = 4, 8\n");
    let out = ncpg(&["phi4", "--config", &cfg, "--out", "o"], &d);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(d.join("o/phi4_scan.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "theta,tau,s,t,value");
    assert!(lines[1].starts_with("0.1,0,4,8,"));
    let fits: Value = serde_json::from_slice(&fs::read(d.join("o/phi4_fits.json")).unwrap()).unwrap();
    assert!(fits[0]["decay"].is_null());
}

#[test]
fn phi4_fits_match_library_and_exponent_fixture() {
    let d = scratch("phi4fit");
    let run = |sub: &str| {
        let out = ncpg(&["phi4", "--out", sub], &d);
        assert_eq!(out.status.code(), Some(0));
        (fs::read(d.join(sub).join("phi4_scan.csv")).unwrap(), fs::read(d.join(sub).join("phi4_fits.json")).unwrap())
    };
    let (scan_a, fits_a) = run("a");
    let (scan_b, fits_b) = run("b");
    assert_eq!(scan_a, scan_b);
    assert_eq!(fits_a, fits_b);
    let fits: Value = serde_json::from_slice(&fits_a).unwrap();
    let cuts = [8.0, 16.0, 32.0, 64.0, 128.0];
    for fit in fits.as_array().unwrap() {
        let theta = fit["theta"].as_f64().unwrap();
        let spec = ncpg::phi4::LatticeSpec::new(theta, cuts.to_vec()).unwrap();
        let lib = ncpg::phi4::covariance_growth(&spec, &cuts).unwrap();
        let slope = fit["growth"]["increment_slope"].as_f64().unwrap();
        assert!((slope - lib.increment_slope).abs() <= 1e-14 * slope.abs());
        assert!((slope - 2.0 * theta).abs() <= 0.1, "theta {theta}: slope {slope}");
    }
}

#[test]
fn unwritable_output_is_exit_two() {
    let d = scratch("unwritable");
    fs::write(d.join("blocker"), "x").unwrap();
    let out = ncpg(&["phi4", "--out", "blocker/sub"], &d);
    assert_eq!(out.status.code(), Some(2));
    let out = ncpg(&["verify", "--suite", "car", "--out", "blocker"], &d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_must_be_positive() {
    let d = scratch("threads");
    let out = Command::new(env!("CARGO_BIN_EXE_ncpg"))
        .args(["verify", "--suite", "car"])
        .env("NCPG_THREADS", "0")
        .current_dir(&d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_ncpg"))
        .args(["verify", "--suite", "car"])
        .env("NCPG_THREADS", "1")
        .current_dir(&d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

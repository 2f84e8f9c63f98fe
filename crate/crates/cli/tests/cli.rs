use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn degiorgi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degiorgi"))
        .args(args)
        .env_remove("DEGIORGI_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> (i32, Value) {
    let out = degiorgi(args);
    let code = out.status.code().expect("exit code");
    let text = String::from_utf8(out.stdout).unwrap();
    let v = serde_json::from_str(&text)
        .unwrap_or_else(|e| panic!("{e}: {text:?} / {}", String::from_utf8_lossy(&out.stderr)));
    (code, v)
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn young_eval_at_zero() {
    let (code, v) = report(&[
        "young",
        "eval",
        "--k",
        "1",
        "--N",
        "2",
        "--variant",
        "phi0",
        "--t",
        "0",
    ]);
    assert_eq!(code, 0);
    assert_eq!(num(&v["result"]["value"]), 0.0);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["variant"], "phi0");
}

#[test]
fn young_submult_passes() {
    let (code, v) = report(&[
        "young",
        "check-submult",
        "--k",
        "1",
        "--N",
        "2",
        "--samples",
        "10000",
        "--seed",
        "42",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["violations"], 0);
    assert_eq!(v["seed"], 42);
    assert_eq!(v["passed"], true);
}

#[test]
fn young_power_conjugate() {
    let (code, v) = report(&["young", "conjugate", "--variant", "power:2", "--s", "10"]);
    assert_eq!(code, 0);
    assert!((num(&v["result"]["value"]) - 25.0).abs() <= 1e-5);
}

#[test]
fn young_sandwich_and_psih() {
    let (code, v) = report(&[
        "young",
        "check-sandwich",
        "--k",
        "2",
        "--N",
        "2",
        "--samples",
        "20",
    ]);
    assert_eq!(code, 0, "{v}");
    let (code, v) = report(&["young", "check-psih", "--k", "1", "--N", "2"]);
    assert_eq!(code, 0, "{v}");
    assert!(num(&v["result"]["comparability"]) <= 16.0);
}

#[test]
fn iterate_bound_a_unit_constants() {
    let (code, v) = report(&[
        "iterate",
        "bound-A",
        "--k",
        "1",
        "--N",
        "2",
        "--phi-ratio",
        "1",
        "--C1",
        "1",
        "--C2",
        "1",
    ]);
    assert_eq!(code, 0);
    assert!((num(&v["result"]["A"]) - 0.5f64.exp()).abs() <= 1e-12);
}

#[test]
fn iterate_summability_diverges() {
    let (code, v) = report(&[
        "iterate",
        "summability",
        "--k",
        "1",
        "--N",
        "2",
        "--superradius",
        "loggain:alpha=0.2",
        "--r0",
        "0.01",
        "--jmax",
        "100000",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["verdict"], "diverges");
    assert!(num(&v["result"]["partial_sum"]) > 0.0);
}

#[test]
fn iterate_run_below_threshold_fails_at_start() {
    let (code, v) = report(&["iterate", "run", "--b0", "0"]);
    assert_eq!(code, 1);
    assert_eq!(v["result"]["first_prov_failure"], 0);
    assert_eq!(v["passed"], false);
}

#[test]
fn iterate_run_default_start_succeeds_and_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let (code, v) = report(&[
        "iterate",
        "run",
        "--steps",
        "50",
        "--trajectory",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["success"], true);
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["j", "b"]);
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 51);
    let b0 = rows[0][1];
    assert!(rows.iter().all(|r| r[1] >= b0 + 2.0 * r[0]));
}

#[test]
fn iterate_osc_schedule_products() {
    let (code, v) = report(&[
        "iterate",
        "osc-schedule",
        "--lambda",
        "0.5",
        "--levels",
        "3",
    ]);
    assert_eq!(code, 0);
    let p: Vec<f64> = v["result"]["products"]
        .as_array()
        .unwrap()
        .iter()
        .map(num)
        .collect();
    assert_eq!(p.len(), 3);
    for (i, x) in p.iter().enumerate() {
        assert!((x - 0.75f64.powi(i as i32 + 1)).abs() <= 1e-15);
    }
    let out = degiorgi(&["iterate", "osc-schedule", "--lambdas", "0.5,1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_linear_profile_in_1d() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    let (code, v) = report(&[
        "solve",
        "--op",
        "isotropic",
        "--weight",
        "const",
        "--dim",
        "1",
        "--grid",
        "256",
        "--bc",
        "0,1",
        "--rhs",
        "zero",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(num(&v["result"]["residual"]) <= 1e-10);
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let mut n = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        let (x, u): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!((u - 0.5 * (x + 1.0)).abs() <= 1e-10, "{x} {u}");
        n += 1;
    }
    assert_eq!(n, 257);
}

#[test]
fn verify_poincare_power_weight() {
    let (code, v) = report(&[
        "verify",
        "poincare",
        "--weight",
        "power:0.5",
        "--dim",
        "2",
        "--trials",
        "100",
        "--seed",
        "7",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["violations"], 0);
    assert!(num(&v["result"]["worst_ratio"]) <= 1.0);
}

#[test]
fn verify_inner_ball_grushin() {
    let (code, v) = report(&[
        "verify",
        "inner-ball",
        "--op",
        "grushin",
        "--f",
        "power:2",
        "--grid",
        "128",
        "--k",
        "1",
        "--N",
        "2",
    ]);
    assert_eq!(code, 0);
    let rho = num(&v["result"]["rho"]);
    assert!(rho.is_finite() && rho >= 0.0);
}

#[test]
fn verify_admissibility_and_upgrade() {
    let (code, v) = report(&[
        "verify",
        "admissibility",
        "--weight",
        "power:0.5",
        "--dim",
        "2",
        "--grid",
        "32",
    ]);
    assert_eq!(code, 0, "{v}");
    assert!(num(&v["result"]["lower"]) <= num(&v["result"]["upper"]));
    let (code, v) = report(&[
        "verify",
        "orlicz-upgrade",
        "--weight",
        "const",
        "--dim",
        "1",
        "--grid",
        "128",
        "--trials",
        "10",
    ]);
    assert_eq!(code, 0, "{v}");
}

#[test]
fn verify_oscillation_small_grid() {
    let (code, v) = report(&[
        "verify",
        "oscillation",
        "--op",
        "isotropic",
        "--grid",
        "64",
        "--levels",
        "2",
    ]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["audit_holds"], true);
}

#[test]
fn norm_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cells.csv");
    std::fs::write(&path, "x,y,w,v\n0,0,0.25,1\n1,0,0.25,-2\n0,1,0.5,2\n").unwrap();
    let (code, v) = report(&[
        "norm",
        "--input",
        path.to_str().unwrap(),
        "--variant",
        "power:2",
    ]);
    assert_eq!(code, 0);
    let exact = (0.25f64 + 0.25 * 4.0 + 0.5 * 4.0).sqrt();
    assert!((num(&v["result"]["norm"]) / exact - 1.0).abs() <= 1e-10);
    std::fs::write(&path, "a,b\n1,2\n").unwrap();
    assert_eq!(
        degiorgi(&["norm", "--input", path.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

fn strip_timestamp(s: &str) -> String {
    s.lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn output_is_deterministic_apart_from_timestamp() {
    let args = [
        "verify", "poincare", "--weight", "const", "--dim", "1", "--grid", "128", "--trials", "20",
        "--seed", "3",
    ];
    let a = String::from_utf8(degiorgi(&args).stdout).unwrap();
    let b = String::from_utf8(degiorgi(&args).stdout).unwrap();
    assert!(a.contains("\"timestamp\""));
    assert_eq!(strip_timestamp(&a), strip_timestamp(&b));
}

#[test]
fn floats_carry_seventeen_digits() {
    let out = String::from_utf8(degiorgi(&["iterate", "bound-A"]).stdout).unwrap();
    assert!(out.contains("\"A\": 1.6487212707001282e0"), "{out}");
}

#[test]
fn usage_and_numerical_exit_codes() {
    assert_eq!(
        degiorgi(&["young", "eval", "--variant", "nope", "--t", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(degiorgi(&["young", "eval", "--t"]).status.code(), Some(2));
    assert_eq!(
        degiorgi(&["young", "eval", "--k", "9", "--t", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(degiorgi(&["solve", "--grid", "4"]).status.code(), Some(2));
    assert_eq!(
        degiorgi(&["iterate", "bound-A", "--phi-ratio", "1000000"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn default_output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_degiorgi"))
        .args(["solve", "--dim", "1", "--grid", "16"])
        .env("DEGIORGI_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap())
            .unwrap();
    assert_eq!(report["command"], "solve");
    assert!(Path::new(&dir.path().join("solve.grid.csv")).exists());
}

#[test]
fn csv_and_table_formats() {
    let out = degiorgi(&["--format", "csv", "young", "eval", "--t", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.lines().any(|l| l.starts_with("result.value,")));
    let out = degiorgi(&["--format", "table", "young", "eval", "--t", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("result.value")));
}

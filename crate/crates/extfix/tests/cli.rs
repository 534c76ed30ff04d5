use std::process::{Command, Output};

use serde_json::Value;

fn extfix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extfix")).args(args).output().expect("spawn extfix")
}

fn run_ok(args: &[&str], code: i32) -> Value {
    let out = extfix(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}\nstderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

#[test]
fn run_e1_converges_to_zero() {
    let r = run_ok(&["run", "--instance", "e1", "--x0", "3", "--y0", "-2", "--steps", "500", "--tol", "1e-9"], 0);
    assert_eq!(r["tool"], "extfix");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["seed"], 0);
    assert_eq!(r["config"]["steps"], 500);
    assert_eq!(r["config"]["instance"], "e1");
    let c = &r["result"]["convergence"];
    assert_eq!(c["limit"], serde_json::json!([0.0]));
    assert_eq!(c["stop_reason"], "tolerance-met");
}

#[test]
fn run_from_the_fixed_point_stops_after_the_window() {
    let r = run_ok(&["run", "--instance", "e1", "--x0", "0", "--y0", "-1"], 0);
    let steps = r["result"]["convergence"]["steps"].as_u64().unwrap();
    assert!(steps <= 11, "{steps}");
}

#[test]
fn run_max_steps_is_undecided() {
    run_ok(&["run", "--instance", "e1", "--steps", "3"], 2);
}

#[test]
fn run_cyclic_reports_gap_residuals() {
    let r = run_ok(&["run", "--instance", "cyclic3-affine"], 0);
    let bp = &r["result"]["best_proximity"];
    for key in ["gap_residuals", "cycle_residuals"] {
        for v in bp[key].as_array().unwrap() {
            assert!(v.as_f64().unwrap() <= 1e-8);
        }
    }
    let r = run_ok(&["run", "--instance", "cyclic3-singleton"], 0);
    assert_eq!(r["result"]["best_proximity"]["gap_residuals"], serde_json::json!([0.0, 0.0, 0.0]));
}

#[test]
fn run_product_with_point_flags() {
    let r = run_ok(&["run", "--instance", "e1-product", "--x0", "3;5", "--y0", "-2;-3"], 0);
    for c in r["result"]["convergence"]["limit"].as_array().unwrap() {
        assert!(c.as_f64().unwrap().abs() <= 1e-8);
    }
}

#[test]
fn run_errors_exit_one() {
    let out = extfix(&["run", "--instance", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown instance"));
    // x0 outside A, so the start is not in P.
    assert_eq!(extfix(&["run", "--instance", "e1", "--x0", "-1"]).status.code(), Some(1));
    assert_eq!(extfix(&["run", "--instance", "e1", "--tol", "0"]).status.code(), Some(1));
    assert_eq!(extfix(&["run", "--instance", "e1-pair"]).status.code(), Some(1));
    assert_eq!(extfix(&["bogus"]).status.code(), Some(1));
}

#[test]
fn verify_examples() {
    let r = run_ok(&["verify", "--instance", "e1", "--samples", "10000", "--seed", "1"], 0);
    assert_eq!(r["seed"], 1);
    assert_eq!(r["result"]["certification"]["verdict"], "certified-on-samples");
    assert_eq!(r["result"]["probe"]["boundedness"]["holds"], true);
    assert!(r["result"]["probe"]["distance_bound"]["first_violation"].is_null());

    let r = run_ok(&["verify", "--instance", "e1", "--lambda", "0.5", "--samples", "10000"], 3);
    assert_eq!(r["result"]["certification"]["verdict"], "refuted");
    assert!(r["result"]["certification"]["witness"].is_object());

    run_ok(&["verify", "--instance", "banach-half", "--samples", "2000"], 0);
}

#[test]
fn scan_examples() {
    let r = run_ok(&["scan", "--kind", "uniqueness", "--instance", "e1", "--grid", "0:100:0.5"], 0);
    assert_eq!(r["result"]["violations"], serde_json::json!([]));
    assert_eq!(r["result"]["grid_points"], 201);

    let r = run_ok(&["scan", "--kind", "uc", "--instance", "e1-pair", "--budget", "1000"], 0);
    assert_eq!(r["result"]["falsifier"]["tried"], 1000);

    let r = run_ok(&["scan", "--kind", "cd", "--instance", "open-interval-pair", "--budget", "1000"], 3);
    assert!(r["result"]["falsifier"]["counterexample"].is_object());

    run_ok(&["scan", "--kind", "uc", "--instance", "circle-origin", "--budget", "10"], 3);
    assert_eq!(extfix(&["scan", "--kind", "uniqueness", "--instance", "e1"]).status.code(), Some(1));
    assert_eq!(extfix(&["scan", "--kind", "cd", "--instance", "e1"]).status.code(), Some(1));
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("trace.csv");
    run_ok(&["run", "--instance", "e1", "--out", csv_path.to_str().unwrap(), "--format", "csv"], 0);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,x_n,u_n,y_n,v_n,rho_xy,f_a_u,f_b_v");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1].parse::<f64>().unwrap(), 3.0);

    let json_path = dir.path().join("run.json");
    run_ok(&["run", "--instance", "e1", "--out", json_path.to_str().unwrap()], 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert!(v["trace"]["rho"].as_array().unwrap().len() > 4);

    let table = dir.path().join("verify.csv");
    run_ok(&["verify", "--instance", "banach", "--samples", "500", "--out", table.to_str().unwrap(), "--format", "csv"], 0);
    assert!(std::fs::read_to_string(&table).unwrap().starts_with("key,value\n"));
}

#[test]
fn instance_files_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shift.json");
    std::fs::write(
        &path,
        r#"{
            "name": "shift",
            "space": { "kind": "euclidean", "dim": 1 },
            "regions": { "a": { "lo": -10, "hi": 10 }, "b": { "lo": -10, "hi": 10 } },
            "maps": { "kind": "affine", "slope": 0.5, "offset": 1.0 },
            "lambda": 0.5,
            "dist": 0.0,
            "infima": { "f_a": 0.0, "f_b": 0.0 }
        }"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let r = run_ok(&["run", "--instance", p, "--x0", "7", "--y0", "-3"], 0);
    let l = r["result"]["convergence"]["limit"][0].as_f64().unwrap();
    assert!((l - 2.0).abs() <= 1e-8);
    run_ok(&["verify", "--instance", p, "--samples", "1000"], 0);

    let missing = dir.path().join("missing.json");
    assert_eq!(extfix(&["run", "--instance", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn list_names_every_builtin() {
    let out = extfix(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["e1", "banach-half", "cyclic3-affine", "e1-pair", "open-interval-pair", "circle-origin"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{name},"))), "{name}");
    }
    let r = run_ok(&["list", "--format", "json"], 0);
    assert_eq!(r["command"], "list");
}

#[test]
fn reports_are_deterministic() {
    let a = extfix(&["verify", "--instance", "e1", "--samples", "3000", "--seed", "9"]);
    let b = extfix(&["verify", "--instance", "e1", "--samples", "3000", "--seed", "9"]);
    assert_eq!(a.stdout, b.stdout);
}

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str], file: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_folgal"))
        .arg(args[0])
        .arg(data(file))
        .args(&args[1..])
        .output()
        .expect("binary runs")
}

fn json(args: &[&str], file: &str) -> (i32, Value) {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    let out = run(&a, file);
    let v = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)));
    (out.status.code().unwrap(), v)
}

fn c(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

#[test]
fn cusp_is_liouvillian() {
    let (code, v) = json(&["analyze"], "cusp.fol");
    assert_eq!(code, 0);
    let r = &v["reducibility"];
    assert_eq!(r["verdict"], "ReducibleDim1");
    assert_eq!(r["label"], "Liouvillian");
    assert_eq!(r["c"], serde_json::json!(["0", "1"]));
    assert_eq!(r["theta_order"], 8);
    assert_eq!(r["theta"]["terms"], serde_json::json!([[8, "1/6"]]));
    assert_eq!(r["residue"], "0");
    assert_eq!(v["gv_witness_present"], true);
    assert_eq!(v["gv"]["verify"]["status"], "pass");
    assert_eq!(v["quasihomog"]["mu"], 2);
}

#[test]
fn second_entry_breaks_reducibility() {
    let (code, v) = json(&["analyze"], "cusp_nonreducible.fol");
    assert_eq!(code, 0);
    let r = &v["reducibility"];
    assert_eq!(r["verdict"], "NotReducible");
    assert_eq!(r["pair"], serde_json::json!([0, 1]));
    assert_eq!(r["bracket_order"], 31);
    assert_eq!(v["gv_witness_present"], false);
    assert_eq!(v["gv"]["search"], "infeasible");
}

#[test]
fn linear_germ_classifies() {
    let (code, v) = json(&["classify"], "linear.fol");
    assert_eq!(code, 0);
    let g = &v["group"];
    assert_eq!(g["classification"]["verdict"], "FormallyLinearizableCandidate");
    assert_eq!(g["upper_bound"], "G1n(1/x, 1)");
    assert_eq!(g["qualifier"], "at order 20, word length 4");
}

#[test]
fn independent_logs_certify_non_solvable() {
    let (code, v) = json(&["classify"], "not_solvable.fol");
    assert_eq!(code, 0);
    assert_eq!(v["group"]["classification"]["verdict"], "NotSolvableCertificate");
    assert_eq!(v["group"]["upper_bound"], "Ginf");
}

#[test]
fn malformed_input_points_at_the_column() {
    let out = run(&["analyze"], "malformed.fol");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2, column 13"), "{err}");
    assert!(err.contains("^"), "{err}");
    assert!(out.stdout.is_empty());

    let (code, v) = json(&["analyze"], "malformed.fol");
    assert_eq!(code, 2);
    assert_eq!(v["error"]["module"], "problem");
}

#[test]
fn precondition_failures_have_distinct_codes() {
    let out = run(&["analyze"], "not_homogeneous.fol");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("quasihomog"));
    let out = run(&["analyze"], "nonisolated.fol");
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not isolated"));
    let out = run(&["holonomy"], "cusp_nonreducible.fol");
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn strict_flags_inconclusive() {
    let out = run(&["reduce", "--order", "8"], "cusp_nonreducible.fol");
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("InconclusiveAtOrder"));
    let out = run(&["reduce", "--order", "8", "--strict"], "cusp_nonreducible.fol");
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn output_is_deterministic() {
    for (cmd, file) in [
        ("analyze", "cusp.fol"),
        ("holonomy", "cusp.fol"),
        ("classify", "not_solvable.fol"),
    ] {
        for fmt in ["text", "json"] {
            let a = run(&[cmd, "--format", fmt], file);
            let b = run(&[cmd, "--format", fmt], file);
            assert_eq!(a.status.code(), Some(0));
            assert_eq!(a.stdout, b.stdout, "{cmd} {fmt}");
        }
    }
}

#[test]
fn cusp_holonomy_report() {
    let (code, v) = json(&["holonomy"], "cusp.fol");
    assert_eq!(code, 0);
    let h = &v["holonomy"];
    let det = c(&h["periods"]["det"]);
    assert!(det.0.abs() < 1e-9 && (det.1.abs() - std::f64::consts::TAU).abs() < 1e-9);
    assert!(h["periods"]["cond"].as_f64().unwrap() < 1e12);
    assert!(h["periods"]["monodromy_deviation"].as_f64().unwrap() < 1e-9);
    assert_eq!(h["T"].as_array().unwrap().len(), 2);
    assert_eq!(h["generators"].as_array().unwrap().len(), 2);
    assert!(h["commutator_deviation"].as_f64().unwrap() < 1e-10);
    // Generators are tangent to the identity with θ = t^8/6.
    for g in h["generators"].as_array().unwrap() {
        assert_eq!(g["terms"][0][0], 1);
        assert_eq!(g["terms"][1][0], 8);
    }
}

#[test]
fn paths_file_matches_automatic_cycles() {
    let (_, auto) = json(&["holonomy"], "cusp.fol");
    let (code, manual) = json(&["holonomy"], "cusp_paths.fol");
    assert_eq!(code, 0);
    assert_eq!(manual["holonomy"]["periods"]["cycles"], "paths");
    for k in 0..2 {
        let a = c(&auto["holonomy"]["T"][k]);
        let b = c(&manual["holonomy"]["T"][k]);
        assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    }
}

#[test]
fn realize_round_trip() {
    let (code, v) = json(&["realize"], "cusp_realize.fol");
    assert_eq!(code, 0);
    assert!(v["realize"]["residual"].as_f64().unwrap() < 1e-12);
    let out = run(&["realize", "--z0", "0,0"], "cusp_realize.fol");
    assert_eq!(out.status.code(), Some(2));
}

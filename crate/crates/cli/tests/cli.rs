use std::process::{Command, Output};

use serde_json::{json, Value};

fn tlfres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlfres")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = tlfres(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn failure(args: &[&str]) -> (i32, String) {
    let out = tlfres(args);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    (out.status.code().unwrap(), v["error"]["code"].as_str().unwrap().to_string())
}

#[test]
fn residue_of_dlog() {
    let v = ok_json(&["residue", "--n", "2", "dlog(t1,t2)"]);
    assert_eq!(v["value"], "1");
}

#[test]
fn residue_over_extension_constants() {
    let v = ok_json(&["residue", "--ext-poly", "x^2 + 1", "[0,1] * t1^-1 * d(t1)"]);
    assert_eq!(v["value"], "0");
    let v = ok_json(&["residue", "--char", "2", "--ext-poly", "x^2 + x + 1", "[0,1] * t1^-1 * d(t1)"]);
    assert_eq!(v["value"], "1");
}

#[test]
fn counterexample_values() {
    assert_eq!(ok_json(&["counterexample"]), json!({ "res_st": "0", "res_nt": "1" }));
}

#[test]
fn global_sum_partial_fractions() {
    let v = ok_json(&["global-sum", "--char", "0", "1/(t*(t-1)) dt"]);
    assert_eq!(v["sum"], "0");
    assert_eq!(v["locals"], json!({ "t": "-1", "t - 1": "1", "inf": "0" }));
    let w = ok_json(&["global-sum", "--char", "0", "--form", "1/(t*(t-1)) dt"]);
    assert_eq!(v, w);
}

#[test]
fn tate_residue_and_traces() {
    assert_eq!(ok_json(&["tate-residue", "t1^-2", "t1^2"])["value"], "2");
    let v = ok_json(&["trace-form", "--kummer", "2", "dlog(t1)"]);
    assert_eq!(v["value"], "1");
    let v = ok_json(&["trace-op", "fin{[0]: 1}"]);
    assert_eq!(v["trace"], "1");
}

#[test]
fn operator_commands() {
    let v = ok_json(&["certify", "proj1(<0)", "--target", "(1,2)"]);
    assert_eq!(v["target"], "(1,2)");
    assert!(v["replayed_probes"].as_u64().unwrap() > 0);
    let v = ok_json(&["decompose", "--n", "2", "--level", "2"]);
    assert_eq!(v["parts"].as_array().unwrap().len(), 2);
    let v = ok_json(&["lift-matrix", "--char", "5", "--c", "1 + t1"]);
    assert_eq!(v["unit_upper_triangular"], true);
}

#[test]
fn exit_codes() {
    assert_eq!(failure(&["residue", "t1 + * t2"]), (2, "ParseError".into()));
    assert_eq!(failure(&["residue", "--window", "2", "inv(1 - t1)^5 * t1^-9 * d(t1)"]).0, 3);
    assert_eq!(failure(&["residue", "--n", "2", "d(t1)"]), (4, "Domain".into()));
    assert_eq!(failure(&["certify", "mul(t1)", "--target", "(3,1)"]).0, 4);
    assert_eq!(failure(&["residue", "--char", "4", "d(t1)"]).0, 4);
}

#[test]
fn identical_invocations_are_byte_identical() {
    for args in [
        &["decompose", "--n", "2", "--level", "1"][..],
        &["certify", "d1", "--seed", "7"],
        &["global-sum", "--char", "5", "(t^3 + 2)/(t^2*(t^2 + 2)) dt"],
        &["selftest", "--only", "5"],
    ] {
        assert_eq!(tlfres(args).stdout, tlfres(args).stdout, "{args:?}");
    }
}

#[test]
fn pretty_and_compact_agree() {
    let args = ["lift-matrix", "--char", "5"];
    let a: Value = serde_json::from_slice(&tlfres(&args).stdout).unwrap();
    let b: Value = serde_json::from_slice(&tlfres(&[&args[..], &["--pretty"]].concat()).stdout).unwrap();
    assert_eq!(a, b);
}

#[test]
fn selftest_single_criterion() {
    let v = ok_json(&["selftest", "--only", "6"]);
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"][0]["criterion"], 6);
}

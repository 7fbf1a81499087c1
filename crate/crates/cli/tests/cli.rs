use std::path::PathBuf;
use std::process::Command;

use manna_cli::{run, EXIT_ASSERTION, EXIT_INPUT, EXIT_OK};
use manna_core::report::{classify_report, solve_report, Settings};
use manna_core::{parse_document, run_demo, Mode};
use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn manna(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("manna").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = manna(args);
    assert_eq!(code, EXIT_OK, "{err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn classify_null_lambda() {
    let (code, out, _) = manna(&["classify", &data("lambda_two.json")]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().next(), Some("Null (t*=0.000000)"));
}

#[test]
fn solve_lambda_minus_one() {
    let (code, out, _) = manna(&["solve", &data("lambda_minus_one.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("4 profile(s) (exhaustive)"), "{out}");
    assert!(out.contains("profile: (-1.5, -1.5)"), "{out}");
    assert!(out.contains("KKT: passed"), "{out}");

    let v = json(&["solve", "--json", &data("lambda_minus_one.json")]);
    assert_eq!(v["profiles"].as_array().unwrap().len(), 4);
    let k = v["selected"].as_u64().unwrap() as usize;
    assert_eq!(v["profiles"][k], serde_json::json!([-1.5, -1.5]));
}

#[test]
fn exact_enumeration_prints_fractions() {
    let v = json(&["enumerate", "--exact", "--json", &data("lambda_minus_one.json")]);
    let profiles: Vec<&Value> = v["profiles"].as_array().unwrap().iter().collect();
    assert_eq!(profiles.len(), 4);
    assert!(profiles.contains(&&serde_json::json!(["-5/2", "-5/6"])), "{profiles:?}");
}

#[test]
fn json_output_is_the_report_serialization() {
    let path = data("lambda_minus_one.json");
    let doc = parse_document(&std::fs::read(&path).unwrap()).unwrap();
    let want = serde_json::to_value(solve_report(&doc, &Settings::for_document(&doc)).unwrap()).unwrap();
    assert_eq!(json(&["solve", "--json", &path]), want);

    let path = data("lambda_two.json");
    let doc = parse_document(&std::fs::read(&path).unwrap()).unwrap();
    let want = serde_json::to_value(classify_report(&doc).unwrap()).unwrap();
    assert_eq!(json(&["classify", "--json", &path]), want);

    let want = serde_json::to_value(run_demo("prop1-two-items", Mode::Float).unwrap()).unwrap();
    assert_eq!(json(&["demo", "prop1-two-items", "--json"]), want);
}

#[test]
fn audit_reports_axioms() {
    let v = json(&["audit", "--json", "--seed", "3", &data("lambda_minus_one.json")]);
    assert_eq!(v["source"], "selected");
    assert_eq!(v["fairness"]["envy_free"], true);
    assert_eq!(v["axioms"]["ete"]["passed"], true);
}

#[test]
fn components_with_oracle() {
    let v = json(&["components", "--json", "--oracle", "100", &data("two_bads.json")]);
    assert_eq!(v["count"], 3);
    assert_eq!(v["oracle"], 3);

    let (code, _, err) = manna(&["components", &data("lambda_minus_one.json")]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("two bads"), "{err}");
}

#[test]
fn demos_exit_codes() {
    let (code, out, _) = manna(&["demo"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("prop1-general"));

    let (code, out, _) = manna(&["demo", "lambda-family"]);
    assert_eq!(code, EXIT_OK, "{out}");
    // The six-by-five count does not match its golden value.
    let (code, out, _) = manna(&["demo", "prop1-general"]);
    assert_eq!(code, EXIT_ASSERTION);
    assert!(out.contains("FAIL profile count"), "{out}");

    let (code, _, err) = manna(&["demo", "nope"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("unknown demo"));
}

#[test]
fn bad_input_exits_one() {
    let (code, _, err) = manna(&["solve", &data("ragged.json")]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("/utilities/1"), "{err}");

    let (code, _, _) = manna(&["solve", &data("missing.json")]);
    assert_eq!(code, EXIT_INPUT);
    let (code, _, _) = manna(&["frobnicate"]);
    assert_eq!(code, EXIT_INPUT);
    let (code, _, _) = manna(&["solve", "--rule", "dictator", &data("lambda_minus_one.json")]);
    assert_eq!(code, EXIT_INPUT);
    let (code, out, _) = manna(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("Usage"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_manna");
    let status = Command::new(bin).args(["classify", &data("lambda_two.json")]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&status.stdout).starts_with("Null (t*=0.000000)"));
    let status = Command::new(bin).args(["solve", &data("ragged.json")]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_INPUT));
    let status = Command::new(bin).args(["demo", "prop1-general"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_ASSERTION));
}

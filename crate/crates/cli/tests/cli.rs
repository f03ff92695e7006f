use std::process::{Command, Output};

use heardof_core::{Collection, Execution};
use serde_json::Value;

fn heardof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heardof"))
        .args(args)
        .env_remove("HEARDOF_CAP")
        .output()
        .expect("the binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn minimal_oblivious_of_one_crash() {
    let v = json_of(&heardof(&["minimal", "--n", "3", "--horizon", "2", "--expr", "crash(1)", "--family", "obliv"]));
    assert_eq!(v["kind"], "oblivious");
    let nexts: Vec<Vec<usize>> = serde_json::from_value(v["nexts"].clone()).unwrap();
    assert_eq!(nexts, vec![vec![0, 1], vec![0, 1, 2], vec![0, 2], vec![1, 2]]);
}

#[test]
fn ho_of_one_crash_is_a_product() {
    let v = json_of(&heardof(&["ho", "--n", "3", "--horizon", "2", "--expr", "crash(1)"]));
    assert_eq!(v["generator"]["kind"], "ho_product");
    assert_eq!(v["generator"]["basis"].as_array().unwrap().len(), 4);
    assert_eq!(v["size"], 4096);
}

#[test]
fn ho_refuses_search_unless_asked() {
    let out = heardof(&["ho", "--expr", "loss(1)", "--strategy", "f-loss"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--enumerate --budget"));
    let v = json_of(&heardof(&["ho", "--expr", "loss(1)", "--strategy", "f-loss", "--enumerate", "--budget", "100000"]));
    assert_eq!(v["generator"]["kind"], "enumerated");
    assert_eq!(v["size"], 82);
}

#[test]
fn parse_errors_report_position() {
    let out = heardof(&["build", "--expr", "crash("]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("position 6"));
}

#[test]
fn cap_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_heardof"))
        .args(["build", "--expr", "crash(1)"])
        .env("HEARDOF_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
    let v = json_of(&heardof(&["build", "--expr", "crash(1)"]));
    assert_eq!(v["collections"].as_array().unwrap().len(), 43);
}

#[test]
fn output_is_byte_identical_and_can_go_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let out = heardof(&["build", "--expr", "crash(1) ~> total", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let again = heardof(&["build", "--expr", "crash(1) ~> total"]);
    assert_eq!(std::fs::read(&path).unwrap(), again.stdout);
}

#[test]
fn traces_parse_back_and_realize_the_collection() {
    // one missing message per round, as the shifted trace requires
    let ho = r#"{"n":3,"horizon":2,"sets":[[[0,1],[0,1,2],[0,1,2]],[[0,1,2],[0,1,2],[0,2]]]}"#;
    let c: Collection = serde_json::from_str(ho).unwrap();
    for kind in ["canonical", "shifted"] {
        let out = heardof(&["trace", "--kind", kind, "--collection", ho]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let t = Execution::from_text(3, 2, &String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(t.extract_heardof().unwrap(), c);
    }
    let out = heardof(&["trace", "--kind", "standard", "--expr", "crash(1)", "--member", "5", "--strategy", "cons"]);
    assert!(out.status.success());
}

#[test]
fn check_reports_counterexamples() {
    let out = heardof(&["check", "--expr", "loss(1)", "--property", "common-round"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "fails");
    assert!(v["witness"]["round"].is_number());
    let v = json_of(&heardof(&["check", "--expr", "crash(1)", "--property", "round-sym"]));
    assert_eq!(v["verdict"], "holds-at-horizon");
    let v = json_of(&heardof(&["check", "--expr", "crash(1)", "--property", "domination"]));
    assert_eq!(v["tier"], "certificate:common-round");
    let v = json_of(&heardof(&["check", "--expr", "loss(1)", "--property", "validity", "--strategy", "f-loss"]));
    assert_eq!(v["verdict"], "holds-at-horizon");
}

#[test]
fn validity_failure_carries_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    std::fs::write(&path, r#"{"kind":"oblivious","n":3,"nexts":[[0,1,2]]}"#).unwrap();
    let out = heardof(&["check", "--expr", "crash(1)", "--property", "validity", "--strategy-file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let trace = v["witness"]["trace"].as_str().unwrap();
    assert!(trace.ends_with("S\n"), "{trace}");
}

#[test]
fn corrupted_suite_fails_with_a_counterexample() {
    // the corrupted check is independent of the others; run the full suite once
    let out = heardof(&["suite", "--corrupt", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let reports: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let c06 = reports.iter().find(|r| r["theorem"] == "c06-crash-combination").unwrap();
    assert_eq!(c06["verdict"], "fails");
    assert!(c06["witness"]["collection"].is_object());
    let failing: Vec<&str> = reports
        .iter()
        .filter(|r| r["verdict"] == "fails")
        .map(|r| r["theorem"].as_str().unwrap())
        .collect();
    // the f_loss characterization does not hold at n=3, R=2 (see the README)
    assert_eq!(
        failing,
        ["c06-crash-combination", "c10b-f-loss-characterization", "c10c-f-loss-shifted-canonical"]
    );
}

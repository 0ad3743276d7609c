use std::process::{Command, Output};

use serde_json::Value;

fn singtrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singtrace")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = singtrace(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn assert_schema(v: &Value) {
    for key in ["command", "params", "results", "diagnostics"] {
        assert!(v.get(key).is_some(), "missing `{key}` in {v}");
    }
    let d = &v["diagnostics"];
    assert!(d.get("oscillation").is_some(), "no oscillation in {d}");
    assert!(d.get("horizon").is_some() || d.get("cutoff").is_some(), "no horizon/cutoff in {d}");
}

#[test]
fn analyze_harmonic() {
    let v = json(&["analyze", "--seq", "harmonic", "--horizon", "1048576", "--eps", "0.05"]);
    assert_schema(&v);
    assert_eq!(v["results"]["verdict"], "eccentric-within-horizon");
    assert_eq!(v["results"]["witnesses"][0]["p"], 8);
}

#[test]
fn analyze_geometric_has_no_witness() {
    let v = json(&["analyze", "--seq", "geometric:r=0.5", "--horizon", "4096"]);
    assert_eq!(v["results"]["verdict"], "no-witness-found");
}

#[test]
fn example4_reference() {
    let v = json(&["example4", "--q", "1", "--s", "14", "--r", "1"]);
    assert_schema(&v);
    assert_eq!(v["results"]["reference"], 1.0);
    assert!(v["results"]["error"].as_f64().unwrap() <= 0.05);
    assert!(v["results"].get("runtime_ms").is_none());
}

#[test]
fn example4_sweep_csv() {
    let out = singtrace(&["example4", "--q", "1", "--r", "1", "--sweep", "11,8,14", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q,s,r,p,estimate,reference,error"));
    let s: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(s, ["8", "11", "14"]);
}

#[test]
fn state_square_window() {
    let v = json(&["state", "--set", "squares", "--window-square", "r=2,s=10"]);
    assert_schema(&v);
    let row = &v["results"]["rows"][0];
    assert_eq!(row["estimate"]["mean"].to_string(), "0.541666666667");
    assert_eq!(row["closed_form_exact"], true);
    let plain = json(&["state", "--set", "squares", "--window-square", "2,10"]);
    assert_eq!(plain["results"], v["results"]);
}

#[test]
fn state_dyadic_and_sweep() {
    let v = json(&["state", "--set", "dyadicblocks", "--window", "k=0,n=40", "--mode", "dyadic", "--m", "3"]);
    assert_schema(&v);
    assert_eq!(v["results"]["rows"][0]["estimate"]["count"], 40);
    // dyadic indices reach 2^64 after one doubling here
    let e = singtrace(&["state", "--set", "dyadicblocks", "--window", "0,40", "--mode", "dyadic", "--sweep"]);
    assert_eq!(e.status.code(), Some(1));
    let v = json(&["state", "--set", "squares", "--window", "0,1000", "--sweep", "--tol", "1e-3"]);
    let steps = v["results"]["sweeps"][0].as_array().unwrap();
    assert!(steps.len() >= 2);
}

#[test]
fn intervals_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("iv.txt");
    std::fs::write(&path, "# two blocks\n1,10\n21,30\n").unwrap();
    let set = format!("intervals:file={}", path.display());
    let v = json(&["state", "--set", &set, "--window", "0,40"]);
    assert_eq!(v["results"]["rows"][0]["estimate"]["hits"], 20);
}

#[test]
fn trace_commands() {
    let v = json(&["trace", "dixmier", "--seq", "harmonic", "--ref", "harmonic", "--omega", "100"]);
    assert_schema(&v);
    assert_eq!(v["results"]["value"], 1.0);
    let v = json(&["trace", "dixmier", "--seq", "harmonic", "--ref", "power:alpha=-2", "--omega", "10"]);
    assert_eq!(v["results"]["value"], "inf");
    assert_eq!(v["results"]["infinite"], true);
    let v = json(&["trace", "varga", "--seq", "power:alpha=-2", "--ref", "harmonic", "--kmax", "4", "--horizon", "65536"]);
    assert_schema(&v);
    assert!(v["results"]["value"].as_f64().unwrap().abs() <= 0.02);
}

#[test]
fn trace_csv_is_running_means() {
    let out = singtrace(&["trace", "dixmier", "--seq", "harmonic", "--ref", "logstep", "--omega", "5", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("omega,mean\n1,"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn dilate_reports_checks() {
    let v = json(&["dilate", "--seq", "geometric:r=0.25", "--k", "2", "--horizon", "200"]);
    assert_schema(&v);
    assert_eq!(v["results"]["checks"]["eigenvalue_gap"]["all_hold"], true);
    let v = json(&["dilate", "--seq", "harmonic", "--k", "2", "--horizon", "50"]);
    assert_eq!(v["results"]["checks"]["eigenvalue_gap"]["all_hold"], false);
}

#[test]
fn pk_witnesses() {
    let v = json(&["pk", "--seq", "harmonic", "--kmax", "3", "--horizon", "4096"]);
    assert_schema(&v);
    let w = v["results"]["witnesses"].as_array().unwrap();
    assert_eq!((w[0]["k"].as_u64(), w[0]["p"].as_u64()), (Some(2), Some(8)));
}

#[test]
fn sweeps_are_sorted() {
    let v = json(&["sweep", "analyze", "--seq", "logstep", "--seq", "harmonic", "--horizon", "1024,64"]);
    assert_schema(&v);
    let rows: Vec<(String, u64)> = v["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["seq"].as_str().unwrap().to_string(), r["report"]["horizon"].as_u64().unwrap()))
        .collect();
    let mut sorted = rows.clone();
    sorted.sort();
    assert_eq!(rows, sorted);
    assert_eq!(rows.len(), 4);
    let v = json(&["sweep", "example4", "--q", "2,1", "--s", "5", "--r", "1"]);
    assert_eq!(v["results"][0]["q"], 1);
    let v = json(&["sweep", "dixmier", "--seq", "harmonic", "--ref", "logstep", "--omega", "1000,100"]);
    assert_eq!(v["results"][0]["omega"], 100);
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let args = ["sweep", "example4", "--q", "1,2,3", "--s", "4,5", "--r", "1"];
    let a = singtrace(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_singtrace")).args(args).env("SINGTRACE_THREADS", "1").output().unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, singtrace(&args).stdout);
}

#[test]
fn out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = singtrace(&["pk", "--seq", "harmonic", "--kmax", "2", "--horizon", "64", "--out", path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "pk");
}

#[test]
fn exit_codes() {
    // usage errors
    assert_eq!(singtrace(&["analyze", "--seq", "harmonic", "--bogus"]).status.code(), Some(2));
    assert_eq!(singtrace(&["analyze", "--seq", "nope"]).status.code(), Some(2));
    assert_eq!(singtrace(&["state", "--set", "squares", "--window", "1"]).status.code(), Some(2));
    assert_eq!(singtrace(&[]).status.code(), Some(2));
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_singtrace"))
        .args(["pk", "--seq", "harmonic", "--horizon", "64"])
        .env("SINGTRACE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
    // domain errors
    let e = singtrace(&["trace", "varga", "--seq", "harmonic", "--ref", "geometric:r=0.5", "--horizon", "64"]);
    assert_eq!(e.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&e.stderr).contains("no witnesses"));
    assert_eq!(singtrace(&["example4", "--q", "2", "--s", "3", "--r", "3"]).status.code(), Some(1));
}

#[test]
fn timing_is_opt_in() {
    let v = json(&["example4", "--q", "1", "--s", "5", "--r", "1", "--timing"]);
    assert!(v["results"]["runtime_ms"].is_number());
    assert!(v["diagnostics"]["runtime_ms"].is_number());
}

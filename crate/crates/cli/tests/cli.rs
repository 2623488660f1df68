use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fmdp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmdp"))
        .args(args)
        .current_dir(dir)
        .env_remove("FRL_WORKERS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gen_env_then_validate_and_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let gen = fmdp(&["gen-env", "--topology", "circle", "--size", "4", "--out", "c4.json"], dir.path());
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));

    let v = fmdp(&["validate", "c4.json"], dir.path());
    assert_eq!(v.status.code(), Some(0));
    assert_eq!(stdout(&v).trim(), "ok");

    let a = fmdp(&["analyze", "c4.json"], dir.path());
    assert!(a.status.success());
    let text = stdout(&a);
    for label in ["S        16", "A        5", "L ", "D ", "gain", "sp(h)", "Q(h)"] {
        assert!(text.contains(label), "missing {label} in {text}");
    }

    let j = fmdp(&["analyze", "c4.json", "--json"], dir.path());
    let value: serde_json::Value = serde_json::from_str(&stdout(&j)).unwrap();
    assert_eq!(value["states"], 16);
    assert!(value["gain"].as_f64().unwrap() > 0.5);
    assert!(value["factored_span"].as_f64().unwrap() >= value["span"].as_f64().unwrap() - 1e-9);
}

#[test]
fn product_circle_has_infinite_diameter() {
    let dir = tempfile::tempdir().unwrap();
    fmdp(&["gen-env", "--topology", "product-circle", "--size", "4", "--out", "pc.json"], dir.path());
    let j = fmdp(&["analyze", "pc.json", "--json"], dir.path());
    let value: serde_json::Value = serde_json::from_str(&stdout(&j)).unwrap();
    assert!(value["diameter"].is_null());
}

#[test]
fn invalid_file_exits_one_with_report() {
    let dir = tempfile::tempdir().unwrap();
    fmdp(&["gen-env", "--topology", "jao", "--size", "2", "--out", "j.json"], dir.path());
    let path = dir.path().join("j.json");
    let mut value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let first = value["transition"][0]["table"]["0,0"][0].as_f64().unwrap();
    value["transition"][0]["table"]["0,0"][0] = serde_json::json!(first + 0.5);
    fs::write(&path, value.to_string()).unwrap();
    let v = fmdp(&["validate", "j.json"], dir.path());
    assert_eq!(v.status.code(), Some(1));
    assert!(!stdout(&v).trim().is_empty());
}

#[test]
fn missing_file_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fmdp(&["validate", "nope.json"], dir.path()).status.code(), Some(2));
    assert_eq!(fmdp(&["analyze", "x.json", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(fmdp(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(fmdp(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "env": {"kind": "sysadmin", "topology": "circle", "size": 3, "noise_seed": 0},
        "agents": [
            {"agent": {"kind": "psrl", "c": 0.75}},
            {"agent": {"kind": "dorl"}, "sweep": [0.03, 0.3]}
        ],
        "horizon": 400,
        "num_seeds": 2,
        "output_dir": "results",
        "log_stride": 100
    }"#;
    fs::write(dir.path().join("exp.json"), config).unwrap();
    let r = fmdp(&["run", "--config", "exp.json", "--workers", "2"], dir.path());
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let out = dir.path().join("results");
    for f in ["aggregate.csv", "summary.json", "plot.py"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read_dir(out.join("runs")).unwrap().count(), 6);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["groups"].as_array().unwrap().len(), 3);
    assert!(stdout(&r).contains("psrl"));

    let alt = fmdp(&["run", "--config", "exp.json", "--out", "elsewhere"], dir.path());
    assert!(alt.status.success());
    assert!(dir.path().join("elsewhere/aggregate.csv").is_file());
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"env": {"kind": "sysadmin"}, "agents": []}"#).unwrap();
    let r = fmdp(&["run", "--config", "bad.json"], dir.path());
    assert_eq!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stderr));
}

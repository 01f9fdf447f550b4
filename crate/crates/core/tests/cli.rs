use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn calib6(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calib6")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_graph(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn assert_schema(rep: &Value) {
    assert_eq!(rep["schema"], "calib6/1");
    assert!(rep["command"].is_string());
    assert!(rep["config"].is_object());
    assert_eq!(rep["config_hash"].as_str().unwrap().len(), 64);
    assert!(rep["files"].is_array());
    let checks = rep["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert!(c["name"].is_string() && c["reference"].is_string());
        assert!(c["status"] == "pass" || c["status"] == "fail");
        assert!(c["value"].is_number() || c["value"].is_null());
    }
    // overall status is the conjunction of the checks
    let all = checks.iter().all(|c| c["status"] == "pass");
    assert_eq!(rep["passed"].as_bool().unwrap(), all);
}

#[test]
fn embed_graph_writes_plan_report_and_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "p3.json", r#"{"vertices":["a","b","c"],"edges":[["a","b"],["b","c"]]}"#);
    let out = dir.path().join("run");
    let o = calib6(&["embed-graph", "--graph", &g, "--glue-edges", "none", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(&out.join("report.json"));
    assert_schema(&rep);
    assert_eq!(rep["command"], "embed-graph");
    assert_eq!(rep["files"].as_array().unwrap().len(), 2);
    let plan = read_json(&out.join("plan.json"));
    assert_eq!(plan["edges"].as_array().unwrap().len(), 2);
    let obj = std::fs::read_to_string(out.join("edges.obj")).unwrap();
    assert!(obj.lines().any(|l| l.starts_with("v ")) && obj.lines().any(|l| l.starts_with("l ")));
    // no temporary files left behind
    for e in std::fs::read_dir(&out).unwrap() {
        assert!(!e.unwrap().file_name().to_string_lossy().starts_with('.'));
    }
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "k4.json", r#"{"vertices":[0,1,2,3],"edges":[[0,1],[0,2],[0,3],[1,2],[1,3],[2,3]]}"#);
    let run = || {
        let o = calib6(&["embed-graph", "--graph", &g, "--glue-edges", "none"]);
        assert_eq!(code(&o), 0);
        let mut v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v["timings"] = Value::Null;
        v
    };
    let (a, b) = (run(), run());
    assert_schema(&a);
    assert_eq!(a, b);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "p2.json", r#"{"vertices":[0,1],"edges":[[0,1]]}"#);
    let from_file = dir.path().join("from_file.json");
    let from_flag = dir.path().join("from_flag.json");
    let cfg = dir.path().join("cfg.json");
    let text = serde_json::json!({ "graph": g, "glue-edges": "none", "out": from_file.to_str().unwrap() });
    std::fs::write(&cfg, text.to_string()).unwrap();

    let o = calib6(&["--config", cfg.to_str().unwrap(), "embed-graph"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(from_file.join("report.json").exists());
    assert_eq!(read_json(&from_file.join("report.json"))["config"]["glue_edges"], "none");

    let o = calib6(&["embed-graph", "--config", cfg.to_str().unwrap(), "--out", from_flag.to_str().unwrap(), "--glue-edges", "0"]);
    assert_eq!(code(&o), 0);
    let rep = read_json(&from_flag.join("report.json"));
    assert_eq!(rep["config"]["glue_edges"], serde_json::json!({ "first": 0 }));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&calib6(&["glue-segment", "--mode", "cone"])), 2);
    assert_eq!(code(&calib6(&["glue-segment", "--grid", "8"])), 2);
    assert_eq!(code(&calib6(&["glue-segment", "--grid", "3"])), 2);
    assert_eq!(code(&calib6(&["embed-graph"])), 2);
    assert_eq!(code(&calib6(&["embed-graph", "--graph", "/nonexistent/g.json"])), 2);
    let g = write_graph(dir.path(), "loop.json", r#"{"vertices":[0],"edges":[[0,0]]}"#);
    assert_eq!(code(&calib6(&["embed-graph", "--graph", &g])), 2);
    let g = write_graph(dir.path(), "ok.json", r#"{"vertices":[0,1],"edges":[[0,1]]}"#);
    assert_eq!(code(&calib6(&["embed-graph", "--graph", &g, "--glue-edges", "some"])), 2);
    let cfg = write_graph(dir.path(), "cfg.json", r#"{"colour":"blue"}"#);
    assert_eq!(code(&calib6(&["--config", &cfg, "kappa"])), 2);
    assert_eq!(code(&calib6(&["no-such-command"])), 2);
}

#[test]
fn kappa_report_lists_the_disagreements() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kappa.json");
    let o = calib6(&["kappa", "--nmax", "12", "--out", out.to_str().unwrap()]);
    let rep = read_json(&out);
    assert_schema(&rep);
    let table = rep["data"]["kappa"].as_array().unwrap();
    assert_eq!(table.len(), (1..=13).sum::<usize>());
    let bad = rep["data"]["disagreements"].as_array().unwrap();
    // exit code follows the checks
    assert_eq!(code(&o), if bad.is_empty() { 0 } else { 1 });
    assert!(bad.iter().all(|e| e["n"].as_u64().unwrap() <= 1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa.trichotomy_disagreements") != bad.is_empty());
}

#[test]
fn glue_segment_on_a_small_grid_emits_a_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("glue.json");
    let mesh = dir.path().join("glue.obj");
    let o = calib6(&[
        "glue-segment", "--mode", "slopes", "--rho1", "0.3", "--rho2", "0.9", "--grid", "9", "--no-refine",
        "--out", out.to_str().unwrap(), "--mesh", mesh.to_str().unwrap(),
    ]);
    let c = code(&o);
    assert!(c == 0 || c == 1, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(&out);
    assert_schema(&rep);
    assert_eq!(rep["command"], "glue-segment");
    assert_eq!(c == 0, rep["passed"].as_bool().unwrap());
    assert_eq!(rep["config"]["grid"], serde_json::json!([9, 9, 17]));
    assert!(rep["files"].as_array().unwrap().iter().any(|f| f.as_str().unwrap().ends_with("glue.obj")));
    let obj = std::fs::read_to_string(&mesh).unwrap();
    assert!(obj.lines().filter(|l| l.starts_with("v ")).count() > 10);
}

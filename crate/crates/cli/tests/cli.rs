use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn vcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcsim")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn edited(dir: &TempDir, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(corpus(name)).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.path().join(name);
    fs::write(&path, v.to_string()).unwrap();
    path
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_prints_flat_metrics() {
    let out = vcsim(&["run", arg(&corpus("single_order.json")), "--check"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let m: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let obj = m.as_object().unwrap();
    assert!(obj.values().all(|v| !v.is_object() && !v.is_array()));
    assert_eq!(m["orders_total"], 1);
    assert_eq!(m["fill_rate"], "1/1");
    assert_eq!(m["fill_rate_decimal"], "1.000000");
    assert_eq!(m["cycle_time_defined"], true);
}

#[test]
fn run_writes_log_and_metrics_files() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("out.log");
    let metrics = dir.path().join("out.json");
    let out = vcsim(&[
        "run",
        arg(&corpus("replenish.json")),
        "--log",
        arg(&log),
        "--metrics",
        arg(&metrics),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(stdout(&out).is_empty());
    let text = fs::read_to_string(&log).unwrap();
    assert!(text.lines().last().unwrap().starts_with("END "));
    let m: Value = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    assert!(m["replenishments"].as_u64().unwrap() >= 1);
}

#[test]
fn empty_scenario_has_undefined_cycle_time() {
    let out = vcsim(&["run", arg(&corpus("no_orders.json"))]);
    assert_eq!(code(&out), 0);
    let m: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(m["orders_total"], 0);
    assert_eq!(m["fill_rate"], "1/1");
    assert_eq!(m["cycle_time_defined"], false);
}

#[test]
fn validation_failures_exit_1() {
    let dir = TempDir::new().unwrap();
    let unknown_key = edited(&dir, "single_order.json", |v| {
        v["surprise"] = Value::Bool(true);
    });
    let out = vcsim(&["validate", arg(&unknown_key)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("surprise"));

    let missing = dir.path().join("nope.json");
    assert_eq!(code(&vcsim(&["run", arg(&missing)])), 1);

    let garbled = dir.path().join("garbled.json");
    fs::write(&garbled, "{\n  \"parties\": [\n  oops\n").unwrap();
    assert_eq!(code(&vcsim(&["validate", arg(&garbled)])), 1);
}

#[test]
fn budget_overrun_exits_3() {
    let dir = TempDir::new().unwrap();
    let tight = edited(&dir, "single_order.json", |v| {
        v["params"]["max_events"] = Value::from(3);
    });
    let out = vcsim(&["run", arg(&tight)]);
    assert_eq!(code(&out), 3, "{out:?}");
}

#[test]
fn validate_and_replay_accept_the_corpus() {
    let out = vcsim(&["validate", arg(&corpus("reference.json"))]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("100 orders"));
    let out = vcsim(&["replay", arg(&corpus("seeded_latency.json"))]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("replay ok"));
}

#[test]
fn batch_reports_each_file_and_the_worst_code() {
    let dir = TempDir::new().unwrap();
    let scenarios = dir.path().join("in");
    fs::create_dir(&scenarios).unwrap();
    for name in ["single_order.json", "multi_line.json"] {
        fs::copy(corpus(name), scenarios.join(name)).unwrap();
    }
    let logs = dir.path().join("logs");
    let out = vcsim(&["run", "--batch", arg(&scenarios), "--check", "--log", arg(&logs)]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("multi_line.json ok {"));
    assert!(lines[1].contains("single_order.json ok {"));
    assert!(logs.join("single_order.log").is_file());

    fs::write(scenarios.join("broken.json"), "{}").unwrap();
    let out = vcsim(&["run", "--batch", arg(&scenarios)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("broken.json failed(1)"));
}

#[test]
fn usage_errors_exit_1() {
    let out = vcsim(&["run", arg(&corpus("single_order.json")), "--batch", "."]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot be used with"));
    assert_eq!(code(&vcsim(&["--help"])), 0);
}

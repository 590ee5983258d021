use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn twinverify(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinverify")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn twins_pass_every_gate_and_leave_an_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = twinverify(dir.path(), &["verify", "--json", "v.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = read_json(&dir.path().join("v.json"));
    assert_eq!(v["command"], "verify");
    assert_eq!(v["status"], "pass");
    assert_eq!(v["l3"]["episodes_matched"], 100);
    assert!(dir.path().join(".twinverify/l3-pong-ref-vs-pong-perf.json").exists());
}

#[test]
fn ordering_mutant_stops_at_l2() {
    let dir = tempfile::tempdir().unwrap();
    let out = twinverify(dir.path(), &["verify", "--backend-b", "pong-mut-opponent-after-ball", "--json", "v.json"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("result: FAIL at L2"), "{}", stdout(&out));
    let v = read_json(&dir.path().join("v.json"));
    assert_eq!((v["l1"]["status"].as_str(), v["failed_phase"].as_str()), (Some("pass"), Some("L2")));
    assert!(v["l3"].is_null(), "L3 ran after an L2 failure");
}

#[test]
fn arithmetic_mutant_stops_at_l1() {
    let dir = tempfile::tempdir().unwrap();
    let out = twinverify(dir.path(), &["verify", "--backend-b", "cartpole-mut-theta-acc-sign", "--json", "-"]);
    assert_eq!(code(&out), 1);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["failed_phase"], "L1");
    assert!(v["l2"].is_null() && v["l3"].is_null());
}

#[test]
fn drift_mutant_fails_l3_with_a_repair_prompt() {
    let dir = tempfile::tempdir().unwrap();
    let out = twinverify(dir.path(), &["verify", "--backend-b", "pong-mut-vx-decay"]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    for heading in ["Divergence:", "(last matching):", "Action taken at step"] {
        assert!(text.contains(heading), "missing {heading}:\n{text}");
    }
}

#[test]
fn a_failed_verify_removes_the_earlier_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let pair = ["--backend-a", "pong-ref", "--backend-b", "pong-mut-vx-decay"];
    let artifact = dir.path().join(".twinverify/l3-pong-ref-vs-pong-mut-vx-decay.json");
    std::fs::create_dir_all(artifact.parent().unwrap()).unwrap();
    std::fs::write(&artifact, "{}").unwrap();
    assert_eq!(code(&twinverify(dir.path(), &[&["verify"][..], &pair].concat())), 1);
    assert!(!artifact.exists());
    let out = twinverify(dir.path(), &[&["transfer"][..], &pair].concat());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("refusing to run transfer"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_2_without_running() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["verify", "--backend-b", "pong-nope", "--json", "v.json"][..],
        &["verify", "--env", "pong", "--backend-b", "cartpole-perf", "--json", "v.json"],
        &["verify", "--episodes", "0", "--json", "v.json"],
        &["bench", "--batches", "64,32", "--json", "v.json"],
        &["verify", "--config", "missing.cfg", "--json", "v.json"],
        &["frobnicate"],
        &["report"],
    ] {
        let out = twinverify(dir.path(), args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        assert!(!dir.path().join("v.json").exists(), "{args:?} wrote a report");
    }
}

#[test]
fn transfer_requires_the_gate_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let out = twinverify(dir.path(), &["transfer"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("twinverify verify"));

    assert_eq!(code(&twinverify(dir.path(), &["verify"])), 0);
    let out = twinverify(dir.path(), &["transfer", "--json", "t.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let t = read_json(&dir.path().join("t.json"));
    let rows = t["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0]["train_backend"].as_str(), rows[1]["train_backend"].as_str()), (Some("pong-ref"), Some("pong-perf")));
    assert!(rows.iter().all(|r| r["bit_identical"] == true && r["equivalent"] == true));
    assert_eq!(t["forced"], false);

    let out = twinverify(dir.path(), &["transfer", "--backend-b", "pong-mut-serve-stream", "--force", "--json", "f.json"]);
    assert!(code(&out) <= 1, "{}", stderr(&out));
    assert_eq!(read_json(&dir.path().join("f.json"))["forced"], true);
}

#[test]
fn gate_dir_is_configurable() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&twinverify(dir.path(), &["verify", "--gate-dir", "gates"])), 0);
    assert!(dir.path().join("gates/l3-pong-ref-vs-pong-perf.json").exists());
    assert_eq!(code(&twinverify(dir.path(), &["transfer"])), 2);
    assert_eq!(code(&twinverify(dir.path(), &["transfer", "--gate-dir", "gates"])), 0);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "env = pong\nepisodes = 3\nseed = 9\n").unwrap();
    let out = twinverify(dir.path(), &["verify", "--config", "run.cfg", "--episodes", "5", "--json", "v.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = read_json(&dir.path().join("v.json"));
    assert_eq!((v["episodes"].as_u64(), v["base_seed"].as_u64()), (Some(5), Some(9)));
}

#[test]
fn short_bench_runs_are_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = twinverify(dir.path(), &["bench", "--batches", "8", "--steps", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("steps per run"), "{}", stderr(&out));
}

#[test]
fn bench_reports_rows_and_speedups() {
    let dir = tempfile::tempdir().unwrap();
    let out = twinverify(dir.path(), &["bench", "--batches", "64,512", "--runs", "2", "--json", "b.json"]);
    assert!(matches!(code(&out), 0 | 3), "{}", stderr(&out));
    assert_eq!(code(&out) == 3, stdout(&out).contains("unstable"));
    let b = read_json(&dir.path().join("b.json"));
    assert_eq!(b["rows"].as_array().unwrap().len(), 2);
    assert_eq!(b["baseline_rows"].as_array().unwrap().len(), 2);
    let speedups = b["timing"]["speedups"].as_array().unwrap();
    for (i, s) in speedups.iter().enumerate() {
        let expect = b["rows"][i]["timing"]["mean_sps"].as_f64().unwrap()
            / b["baseline_rows"][i]["timing"]["mean_sps"].as_f64().unwrap();
        assert!((s.as_f64().unwrap() - expect).abs() < 1e-9);
    }
    assert!(stdout(&out).contains("speedup"));
}

#[test]
fn report_merges_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&twinverify(dir.path(), &["verify", "--json", "v1.json"])), 0);
    assert_eq!(code(&twinverify(dir.path(), &["verify", "--episodes", "7", "--json", "v2.json"])), 0);
    assert_eq!(code(&twinverify(dir.path(), &["transfer", "--json", "t.json"])), 0);

    let out = twinverify(dir.path(), &["report", "v1.json", "t.json", "v2.json", "--json", "s.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("warning: v2.json: replaces an earlier verify report for pong"));
    let text = stdout(&out);
    assert!(text.contains("| Env | Backends | L1 | L2 | L3 ep. | Mode | Xfer | Status |"), "{text}");
    assert!(text.contains("| pong | pong-ref / pong-perf | 12 ✓ | 3 ✓ | 7 ✓ | exact | ✓ | ✓ |"), "{text}");

    let v = read_json(&dir.path().join("v2.json"));
    let row = &read_json(&dir.path().join("s.json"))["rows"][0];
    assert_eq!(row["l1"]["total"], v["l1"]["cases"]);
    assert_eq!(row["l2"]["passed"], v["l2"]["passed"]);
    assert_eq!(row["l3_episodes"], v["l3"]["episodes"]);
    assert_eq!(row["transfer_equivalent"], true);
}

#[test]
fn report_names_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"command\": \"verify\"").unwrap();
    let out = twinverify(dir.path(), &["report", "bad.json"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.json"));
}

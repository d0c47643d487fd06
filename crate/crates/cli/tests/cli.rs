use std::path::Path;
use std::process::{Command, Output};

fn finrank(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finrank")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let o = finrank(args, cwd);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["ingest", "--synthetic", "12", "--seed", "1", "--out", "train"], d);
    ok(&["ingest", "--synthetic", "4", "--seed", "2", "--chunks", "55", "--out", "val"], d);
    let out = ok(&["index-build", "--dataset", "train/dataset.jsonl", "--task", "document", "--out", "idx"], d);
    assert!(out.contains("indexed 12 exemplars"));

    std::fs::create_dir(d.join("cfg")).unwrap();
    std::fs::write(
        d.join("cfg/run19.json"),
        r#"{"run_id":"19","seed":42,
            "document":{"prompt":"P4","model":"gpt-5","icl":{"k":5,"embedding":"mock","index_dir":"../idx"}},
            "chunk":{"prompt":"P4","model":"gpt-5"}}"#,
    )
    .unwrap();
    let out = ok(&["run", "--config", "cfg/run19.json", "--dataset", "val/dataset.jsonl", "--out", "r19"], d);
    assert!(out.contains("8 samples, 0 failed"), "{out}");
    for f in ["manifest.json", "rankings.jsonl", "telemetry.jsonl", "scores.csv"] {
        assert!(d.join("r19").join(f).exists());
    }

    let eval = ok(&["eval", "--dataset", "val/dataset.jsonl", "--out", "r19"], d);
    let all = out.lines().find(|l| l.starts_with("NDCG@5 all")).unwrap();
    assert!(eval.contains(all));

    ok(&["eda", "--dataset", "val/dataset.jsonl", "--out", "eda"], d);
    let ranks = std::fs::read_to_string(d.join("eda/rank_distribution.csv")).unwrap();
    assert_eq!(ranks.lines().count(), 6);

    ok(&["report", "--dataset", "r19/telemetry.jsonl", "--out", "rep"], d);
    let rep = std::fs::read_to_string(d.join("rep/feasibility.csv")).unwrap();
    let tasks: Vec<&str> = rep.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(tasks, ["Document", "Chunk", "Combined"]);
}

#[test]
fn stats_reproduces_baseline_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("runs.csv"),
        "run_id,score\n12,0.66537\n12,0.67366\n12,0.68523\n12,0.68579\n12,0.69019\n\
         19,0.70491\n19,0.70827\n19,0.70865\n19,0.70923\n19,0.71181\n19,0.71277\n19,0.71375\n19,0.71713\n19,0.71818\n",
    )
    .unwrap();
    ok(&["stats", "--dataset", "runs.csv", "--out", "st", "--baseline", "12"], d);
    let welch = std::fs::read_to_string(d.join("st/welch.csv")).unwrap();
    let row = welch.lines().nth(1).unwrap();
    assert!(row.starts_with("Run 12 vs Run 19,-6.58157,"), "{row}");
    assert!(row.ends_with(",0.00141,Significant"), "{row}");
    let desc = std::fs::read_to_string(d.join("st/descriptive.csv")).unwrap();
    assert!(desc.contains("19,9,0.71163,0.00433,"), "{desc}");
}

#[test]
fn unconfigured_http_provider_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["ingest", "--synthetic", "2", "--out", "val"], d);
    std::fs::write(
        d.join("run.json"),
        r#"{"run_id":"x","seed":1,"provider":"http","chunk":{"prompt":"P1","model":"m"}}"#,
    )
    .unwrap();
    // the http provider without PRISM_API_BASE is a configuration error
    let o = Command::new(env!("CARGO_BIN_EXE_finrank"))
        .args(["run", "--config", "run.json", "--dataset", "val/dataset.jsonl", "--out", "out"])
        .env_remove("PRISM_API_BASE")
        .env_remove("PRISM_API_KEY")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn sample_failures_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["ingest", "--synthetic", "2", "--out", "val"], d);
    std::fs::write(
        d.join("run.json"),
        r#"{"run_id":"x","seed":1,"provider":"http","parallelism":1,
            "retry":{"max_retries":0,"initial_delay":0,"multiplier":1.0,"max_delay":0},
            "chunk":{"prompt":"P1","model":"m"}}"#,
    )
    .unwrap();
    // nothing listens on the discard port, so every call fails in transport
    let o = Command::new(env!("CARGO_BIN_EXE_finrank"))
        .args(["run", "--config", "run.json", "--dataset", "val/dataset.jsonl", "--out", "out"])
        .env("PRISM_API_BASE", "http://127.0.0.1:9/v1")
        .env("PRISM_API_KEY", "test")
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("2 samples, 2 failed"));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["failures"].as_array().unwrap().len(), 2);
    assert_eq!(m["deterministic"], false);
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.jsonl"), "{\"sample_id\":\"a\",\"task\":\"document\"}\n").unwrap();
    let o = finrank(&["ingest", "--dataset", "bad.jsonl", "--out", "o"], d);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1: missing query"));
    let o = finrank(&["run", "--config", "missing.json", "--dataset", "bad.jsonl", "--out", "o"], d);
    assert!(!o.status.success());
}

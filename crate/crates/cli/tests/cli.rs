use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn tasksel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tasksel")).args(args).output().unwrap()
}

fn write_pool(dir: &Path, name: &str, lines: &[String]) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

fn toy_pool(dir: &Path) -> PathBuf {
    let mut lines = Vec::new();
    for (t, n) in [("a", 3), ("b", 10), ("c", 10)] {
        for i in 0..n {
            lines.push(format!(r#"{{"id":"{t}{i}","task":"{t}"}}"#));
        }
    }
    write_pool(dir, "toy.jsonl", &lines)
}

/// Eight tasks of 40 prompts; tasks 2 and 5 have low confidence.
fn eight_task_pool(dir: &Path) -> PathBuf {
    let mut lines = Vec::new();
    for t in 0..8 {
        let conf = if t == 2 || t == 5 { 0.1 } else { 0.6 };
        for i in 0..40 {
            let c = conf + 0.001 * i as f64;
            lines.push(format!(r#"{{"id":"t{t}-{i}","task":"task{t}","confidence":{c}}}"#));
        }
    }
    write_pool(dir, "eight.jsonl", &lines)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn selected_counts(m: &Value) -> Vec<u64> {
    m["per_task"].as_array().unwrap().iter().map(|t| t["selected"].as_u64().unwrap()).collect()
}

#[test]
fn task_diversity_manifest() {
    let dir = TempDir::new().unwrap();
    let pool = toy_pool(dir.path());
    let out = dir.path().join("m.json");
    let o = tasksel(&["select", "--pool", s(&pool), "--strategy", "task_diversity", "--budget", "13", "--output", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&out);
    assert_eq!(selected_counts(&m), [3, 5, 5]);
    assert_eq!(m["strategy"], "task_diversity");
    assert_eq!(m["params"]["budget"], "13");
    assert_eq!(m["inputs"]["pool"], s(&pool));
    assert_eq!(m["selected_ids"].as_array().unwrap().len(), 13);
}

#[test]
fn weighted_on_eight_tasks_respects_floor() {
    let dir = TempDir::new().unwrap();
    let pool = eight_task_pool(dir.path());
    let out = dir.path().join("m.json");
    let o = tasksel(&[
        "select", "--pool", s(&pool), "--strategy", "weighted_task_diversity", "--budget", "80", "--seed", "3",
        "--output", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&out);
    let counts = selected_counts(&m);
    assert_eq!(counts.len(), 8);
    assert!(counts.iter().all(|&c| c >= 5), "{counts:?}");
    assert_eq!(counts.iter().sum::<u64>(), 80);
    assert!(counts[2] > counts[0] && counts[5] > counts[0]);
    assert_eq!(m["params"]["base"], "5");

    let report = tasksel(&["report", s(&out)]);
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("task") && !l.starts_with("task ")).collect();
    assert_eq!(rows.len(), 8);
    // sorted by count, low-confidence tasks first
    assert!(rows[0].starts_with("task2") && rows[1].starts_with("task5"), "{text}");
    assert!(text.contains("conf_t"));
}

#[test]
fn budget_over_pool_selects_all_with_warning() {
    let dir = TempDir::new().unwrap();
    let pool = toy_pool(dir.path());
    let out = dir.path().join("m.json");
    let o = tasksel(&["select", "--pool", s(&pool), "--strategy", "random", "--budget", "100", "--output", s(&out)]);
    assert!(o.status.success());
    let m = read_json(&out);
    assert_eq!(m["selected_ids"].as_array().unwrap().len(), 23);
    assert!(!m["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let pool = eight_task_pool(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = tasksel(&[
            "select", "--pool", s(&pool), "--strategy", "task_diversity", "--budget", "50", "--seed", "42",
            "--output", s(&out),
        ]);
        assert!(o.status.success());
        fs::read(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn score_cache_contents_and_reuse() {
    let dir = TempDir::new().unwrap();
    let pool = write_pool(
        dir.path(),
        "p.jsonl",
        &[
            r#"{"id":"x","task":"t","token_probs":[[0.7,0.2,0.1],[0.5,0.5]]}"#.to_string(),
            r#"{"id":"y","task":"t","token_probs":[[0.9,0.1],[0.6,0.4]]}"#.to_string(),
            r#"{"id":"z","task":"u","confidence":0.3}"#.to_string(),
        ],
    );
    let cache = dir.path().join("scores.jsonl");
    assert!(tasksel(&["score", "--pool", s(&pool), "--output", s(&cache)]).status.success());
    let first = fs::read(&cache).unwrap();
    assert!(tasksel(&["score", "--pool", s(&pool), "--output", s(&cache)]).status.success());
    assert_eq!(first, fs::read(&cache).unwrap());

    let lines: Vec<Value> = String::from_utf8(first)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    for key in ["confidence", "mean_entropy", "mean_margin", "min_margin"] {
        assert!(lines[0].get(key).is_some(), "{key}");
    }
    assert_eq!(lines[2]["confidence"], 0.3);
    assert!(lines[2].get("mean_entropy").is_none() && lines[2].get("min_margin").is_none());

    let out = dir.path().join("m.json");
    let o = tasksel(&[
        "select", "--pool", s(&pool), "--strategy", "least_confidence", "--budget", "1", "--scores-cache",
        s(&cache), "--output", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // x: 0.35, y: 0.54, z: 0.3
    assert_eq!(read_json(&out)["selected_ids"][0], "z");
    assert_eq!(read_json(&out)["inputs"]["scores_cache"], s(&cache));
}

#[test]
fn facility_location_with_sidecar_reports_trace() {
    let dir = TempDir::new().unwrap();
    let lines: Vec<String> = (0..6).map(|i| format!(r#"{{"id":"e{i}","task":"t{}"}}"#, i % 2)).collect();
    let pool = write_pool(dir.path(), "p.jsonl", &lines);
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&6u64.to_le_bytes());
    bytes.extend_from_slice(&2u64.to_le_bytes());
    for (x, y) in [(0.0f32, 0.0f32), (0.1, 0.0), (5.0, 5.0), (5.1, 5.0), (0.0, 0.1), (5.0, 5.1)] {
        bytes.extend_from_slice(&x.to_le_bytes());
        bytes.extend_from_slice(&y.to_le_bytes());
    }
    let emb = dir.path().join("e.bin");
    fs::write(&emb, bytes).unwrap();
    let out = dir.path().join("m.json");
    let o = tasksel(&[
        "select", "--pool", s(&pool), "--embeddings", s(&emb), "--strategy", "facility_location", "--budget", "2",
        "--gamma", "0.002", "--output", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&out);
    assert_eq!(m["params"]["kernel"], "rbf");
    assert_eq!(m["params"]["gamma"], "0.002");
    assert_eq!(m["objective_trace"].as_array().unwrap().len(), 2);
    let text = String::from_utf8(tasksel(&["report", s(&out)]).stdout).unwrap();
    assert!(text.contains("steps=2"), "{text}");
}

#[test]
fn failures_exit_nonzero_without_manifest() {
    let dir = TempDir::new().unwrap();
    let pool = toy_pool(dir.path());
    let out = dir.path().join("m.json");
    let args = |strategy: &str| {
        vec!["select".to_string(), "--pool".into(), s(&pool).into(), "--strategy".into(), strategy.into(),
            "--budget".into(), "3".into(), "--output".into(), s(&out).into()]
    };
    for bad in ["nonsense", "k_center", "least_confidence"] {
        let o = Command::new(env!("CARGO_BIN_EXE_tasksel")).args(args(bad)).output().unwrap();
        assert!(!o.status.success(), "{bad}");
        assert!(!out.exists(), "{bad}");
    }
    let o = tasksel(&["select", "--pool", s(&pool), "--strategy", "random", "--budget", "0", "--output", s(&out)]);
    assert!(!o.status.success());

    let bad_line = write_pool(dir.path(), "bad.jsonl", &[r#"{"id":"a","task":"t"}"#.into(), "{oops".into()]);
    let o = tasksel(&["select", "--pool", s(&bad_line), "--strategy", "random", "--budget", "1", "--output", s(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert!(!out.exists());

    let corrupt = dir.path().join("corrupt.json");
    fs::write(&corrupt, "{\"strategy\": \"random\", ").unwrap();
    let o = tasksel(&["report", s(&corrupt)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed manifest"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn npss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npss"))
        .args(args)
        .env("NPSS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

/// Small synthetic pools in `dir`: 10 nodes, 3 planted.
fn synth(dir: &Path) {
    let o = npss(&[
        "synth", "--nodes", "10", "--anomalous", "3", "--z", "60", "--real", "80", "--fake", "80", "--seed", "3",
        "--out-dir", dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let o = npss(&["scan", "--test", "t.csv", "--out", "r.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--background"), "{}", stderr(&o));
}

#[test]
fn help_documents_formats() {
    let o = npss(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["CSV", "NPSS", "report", "NPSS_THREADS"] {
        assert!(text.contains(needle), "help lacks {needle}");
    }
}

#[test]
fn synth_scan_eval_pipeline() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    synth(d);
    for f in ["background.csv", "real.csv", "fake.csv", "planted_nodes.txt"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let planted: Vec<usize> = fs::read_to_string(d.join("planted_nodes.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();

    let o = npss(&[
        "scan", "--background", &path(d, "background.csv"), "--test", &path(d, "fake.csv"), "--out",
        &path(d, "result.json"), "--emit-indicator", &path(d, "nodes.txt"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("score="));

    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("result.json")).unwrap()).unwrap();
    let cols: Vec<usize> = serde_json::from_value(report["col_subset"].clone()).unwrap();
    assert_eq!(cols, planted);
    assert!(report["score"].as_f64().unwrap() > 0.0);
    assert_eq!(report["restarts"], 10);

    let indicator: Vec<String> = fs::read_to_string(d.join("nodes.txt")).unwrap().lines().map(String::from).collect();
    assert_eq!(indicator.len(), 10);
    for (j, v) in indicator.iter().enumerate() {
        assert_eq!(v == "1", planted.contains(&j), "node {j}");
    }

    let o = npss(&[
        "eval", "--background", &path(d, "background.csv"), "--real-pool", &path(d, "real.csv"), "--fake-pool",
        &path(d, "fake.csv"), "--proportions", "0.2,0.5", "--size", "20", "--trials", "5", "--clean-trials", "5",
        "--individual", "--out", &path(d, "eval.csv"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(d.join("eval.csv")).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("proportion,auc,"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn fixed_seed_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    synth(d);
    let run = |out: &str| {
        let o = npss(&[
            "scan", "--background", &path(d, "background.csv"), "--test", &path(d, "real.csv"), "--seed", "7",
            "--no-timing", "--out", &path(d, out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (stdout(&o), fs::read(d.join(out)).unwrap())
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn pvalues_and_individual_mode() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("bg.csv"), "0.1,5\n0.2,6\n0.3,7\n0.4,8\n").unwrap();
    fs::write(d.join("test.csv"), "0.25,9\n0.0,5\n").unwrap();

    let o = npss(&["pvalues", "--background", &path(d, "bg.csv"), "--test", &path(d, "test.csv"), "--out", &path(d, "p.csv")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p: Vec<Vec<f64>> = fs::read_to_string(d.join("p.csv"))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(p, vec![vec![0.6, 0.2], vec![1.0, 1.0]]);

    let o = npss(&[
        "scan", "--background", &path(d, "bg.csv"), "--test", &path(d, "test.csv"), "--mode", "individual",
        "--out", &path(d, "ind.json"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("ind.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "individual");
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_data_exits_one() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("bg.csv"), "1,2\n3\n").unwrap();
    fs::write(d.join("test.csv"), "1,2\n").unwrap();
    let o = npss(&["scan", "--background", &path(d, "bg.csv"), "--test", &path(d, "test.csv"), "--out", &path(d, "r.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ragged"), "{}", stderr(&o));
    assert!(!d.join("r.json").exists());

    fs::write(d.join("bg.csv"), "1,2\n3,4\n").unwrap();
    fs::write(d.join("test.csv"), "1,2,3\n").unwrap();
    let o = npss(&["scan", "--background", &path(d, "bg.csv"), "--test", &path(d, "test.csv"), "--out", &path(d, "r.json")]);
    assert_eq!(o.status.code(), Some(1));

    let o = npss(&["scan", "--background", &path(d, "missing.csv"), "--test", &path(d, "test.csv"), "--out", &path(d, "r.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.csv"));
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn famspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_famspec")).args(args).output().expect("run famspec")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn error_of(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_eq!(v["schema_version"], 1);
    v["error"].clone()
}

fn read_json(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn two_singletons_analyze_to_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = famspec(&["generate", "--q", "2", "--sizes", "1,1", "--low", "0", "--epsilon", "0.1", "--seed", "7", "--out", &p(d, "d")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = famspec(&["analyze", "--in", &p(d, "d/A.csv"), "--q", "auto", "--out", &p(d, "analysis.json")]);
    assert!(out.status.success());
    let a = read_json(&p(d, "analysis.json"));
    assert_eq!(a["q"], 2);
    assert_eq!(a["schema_version"], 1);
}

#[test]
fn identify_rejects_zero_entries() {
    let dir = tempfile::tempdir().unwrap();
    let m = p(dir.path(), "m.csv");
    std::fs::write(&m, "0.5,0.5,0\n0.2,0.3,0.5\n0.1,0.1,0.8\n").unwrap();
    let out = famspec(&["identify", "--in", &m, "--q", "2", "--out", &p(dir.path(), "id")]);
    assert_eq!(out.status.code(), Some(3));
    let e = error_of(&out);
    assert!(e["message"].as_str().unwrap().contains("strict positivity violated"));
    assert_eq!(e["exit_code"], 3);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = famspec(&["analyze", "--in", &p(dir.path(), "missing.csv"), "--out", &p(dir.path(), "a.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "usage");
    assert_eq!(famspec(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(famspec(&["identify", "--bogus"]).status.code(), Some(2));
    let out = famspec(&["generate", "--q", "3", "--sizes", "2,2", "--low", "0", "--epsilon", "0.1", "--seed", "1", "--out", &p(dir.path(), "g")]);
    assert_eq!(out.status.code(), Some(2));
    let out = famspec(&["generate", "--q", "2", "--sizes", "2,2", "--low", "0", "--epsilon", "1.5", "--seed", "1", "--out", &p(dir.path(), "g")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(famspec(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_csv_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let m = p(dir.path(), "m.csv");
    std::fs::write(&m, "0.5,0.5\n1.0\n").unwrap();
    let out = famspec(&["analyze", "--in", &m, "--out", &p(dir.path(), "a.json")]);
    assert_eq!(out.status.code(), Some(4));
    let e = error_of(&out);
    assert_eq!(e["kind"], "parse");
    assert!(e["message"].as_str().unwrap().contains("line 2"));
}

#[test]
fn full_pipeline_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |args: &[&str]| {
        let out = famspec(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    };
    run(&["generate", "--q", "3", "--sizes", "4,5,6", "--low", "6", "--epsilon", "0.01", "--seed", "3", "--out", &p(d, "s")]);
    run(&["identify", "--in", &p(d, "s/A.csv"), "--out", &p(d, "id")]);
    run(&["order", "--jhat", &p(d, "id/jhat.csv"), "--assign", &p(d, "id/assign.json"), "--out", &p(d, "order.json")]);
    for (kind, input, out) in [
        ("heatmap", "s/A.csv", "h.svg"),
        ("heatmap", "s/A.csv", "h.pgm"),
        ("spectrum", "s/A.csv", "s.svg"),
        ("columns", "id/jhat.csv", "c.svg"),
        ("power", "s/A.csv", "p.svg"),
    ] {
        run(&["render", "--kind", kind, "--in", &p(d, input), "--perm", &p(d, "order.json"), "--out", &p(d, out)]);
    }
    assert!(std::fs::read(p(d, "h.pgm")).unwrap().starts_with(b"P5"));

    let assign = read_json(&p(d, "id/assign.json"));
    assert_eq!(assign["q"], 3);
    let labels: Vec<u64> = assign["assignment"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert!(labels.iter().all(|&l| (1..=3).contains(&l)));
    let order = read_json(&p(d, "order.json"));
    let mut people: Vec<u64> = order["person_order"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    people.sort_unstable();
    assert_eq!(people, (1..=21).collect::<Vec<_>>());

    let out = run(&["verify", "--society", &p(d, "s")]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() > 20);
    let out = famspec(&["verify", "--society", &p(d, "s"), "--tol", "0"]);
    assert_eq!(out.status.code(), Some(3));

    run(&["perturb", "--society", &p(d, "s"), "--epsilon-list", "0.02,0.01,0.005", "--out", &p(d, "pt.json")]);
    let pt = read_json(&p(d, "pt.json"));
    for r in pt["lambda_ratios"].as_array().unwrap() {
        let r = r.as_f64().unwrap();
        assert!((2.5..=6.0).contains(&r), "ratio {r}");
    }
}

#[test]
fn tampered_society_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = famspec(&["generate", "--q", "2", "--sizes", "3,3", "--low", "2", "--epsilon", "0.01", "--seed", "1", "--out", &p(d, "s")]);
    assert!(out.status.success());
    let j = p(d, "s/j.csv");
    let mut m = famspec::io::read_matrix(Path::new(&j)).unwrap();
    m[(0, 0)] += 0.1;
    famspec::io::write_matrix(Path::new(&j), &m).unwrap();
    let out = famspec(&["verify", "--society", &p(d, "s")]);
    assert_eq!(out.status.code(), Some(3));
}

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn progx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_progx")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// A small five-line star scene on disk.
fn star_scene(dir: &TempDir, seed: &str) -> std::path::PathBuf {
    let scene = dir.path().join(format!("star{seed}.txt"));
    let out = progx(&["synth", "--gen", "star", "--lines", "5", "--seed", seed, "-o", path(&scene)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    scene
}

const TUNED: [&str; 8] = ["--threshold", "3", "--label-cost", "1000", "--min-support", "40", "--cell-size", "10"];

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read_to_string(star_scene(&dir, "7")).unwrap();
    let again = progx(&["synth", "--gen", "star", "--lines", "5", "--seed", "7"]);
    assert_eq!(stdout(&again), a);
    let b = std::fs::read_to_string(star_scene(&dir, "8")).unwrap();
    assert_ne!(a, b);

    // 5 x 250 inliers and as many outliers at the default ratio 0.5
    let rows = a.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count();
    assert_eq!(rows, 2500);
    assert!(a.lines().any(|l| l.starts_with("# seed: 7")));
}

#[test]
fn fit_writes_the_result_schema() {
    let dir = tempfile::tempdir().unwrap();
    let scene = star_scene(&dir, "1");
    let mut args = vec!["fit", path(&scene), "--seed", "2"];
    args.extend(TUNED);
    let out = progx(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["instances", "labels", "energy", "snapshots", "config", "timing_ms"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    let instances = doc["instances"].as_array().unwrap();
    assert_eq!(instances.len(), 5);
    assert!(instances.iter().all(|h| h["class"] == "line" && h["params"].as_array().unwrap().len() == 2));
    let labels = doc["labels"].as_array().unwrap();
    assert_eq!(labels.len(), 2500);
    assert!(labels.iter().all(|l| l.as_u64().unwrap() <= 5));
    let e = &doc["energy"];
    let sum = e["data"].as_f64().unwrap() + e["smooth"].as_f64().unwrap() + e["label"].as_f64().unwrap();
    assert!((sum - e["total"].as_f64().unwrap()).abs() <= 1e-9 * sum.abs().max(1.0));
    // summary snapshots carry no per-point payload unless requested
    assert!(doc["snapshots"][0].get("labels").is_none());
}

#[test]
fn fit_csv_plot_and_full_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let scene = star_scene(&dir, "3");
    let svg = dir.path().join("plot.svg");
    let mut args = vec!["fit", path(&scene), "--format", "csv", "--plot", path(&svg)];
    args.extend(TUNED);
    let out = progx(&args);
    assert!(out.status.success());
    let csv = stdout(&out);
    assert!(csv.starts_with("point,label\n"));
    assert_eq!(csv.lines().count(), 2501);
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(plot.matches("<circle").count(), 2500);

    let mut args = vec!["fit", path(&scene), "--snapshots"];
    args.extend(TUNED);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&progx(&args))).unwrap();
    let first = &doc["snapshots"][0];
    assert_eq!(first["labels"].as_array().unwrap().len(), 2500);
    assert_eq!(first["instances"].as_array().unwrap().len(), first["instance_count"].as_u64().unwrap() as usize);
}

#[test]
fn eval_scores_a_saved_result() {
    let dir = tempfile::tempdir().unwrap();
    let scene = star_scene(&dir, "4");
    let result = dir.path().join("result.json");
    let mut args = vec!["fit", path(&scene), "-o", path(&result)];
    args.extend(TUNED);
    assert!(progx(&args).status.success());

    let out = progx(&["eval", path(&result), "--scene", path(&scene)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let me = report["misclassification_error"].as_f64().unwrap();
    assert!((0.0..0.1).contains(&me), "ME {me}");
    assert_eq!(report["false_negatives"], 0);
    assert_eq!(report["false_positives"], 0);

    let csv = stdout(&progx(&["eval", path(&result), "--scene", path(&scene), "--format", "csv"]));
    assert_eq!(csv.lines().next(), Some("me,fn,fp,delta,ms"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn bench_emits_one_row_per_run() {
    let mut args = vec!["bench", "--gen", "star", "--lines", "4", "--points", "100", "--runs", "5", "--seed", "9"];
    args.extend(TUNED);
    let out = progx(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("run,seed,me,fn,fp,ms"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 6);
        assert_eq!(row[0], i.to_string());
        let me: f64 = row[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&me));
    }
    // per-run seeds differ and are reproducible
    let seeds: std::collections::HashSet<&str> = rows.iter().map(|r| r[1]).collect();
    assert_eq!(seeds.len(), 5);
    let again = stdout(&progx(&args));
    let seeds_again: Vec<&str> = again.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds_again, rows.iter().map(|r| r[1]).collect::<Vec<_>>());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let scene = star_scene(&dir, "5");
    for args in [
        vec!["fit"],
        vec!["frobnicate"],
        vec!["fit", path(&scene), "--threshold", "-1"],
        vec!["fit", path(&scene), "--confidence", "1.5"],
        vec!["fit", path(&scene), "--classes", "parabola"],
        vec!["fit", path(&scene), "--classes", "line", "--format", "xml"],
        vec!["bench", "--runs", "0"],
    ] {
        let out = progx(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(progx(&["--help"]).status.code(), Some(0));
    assert_eq!(progx(&["fit", "--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    let out = progx(&["fit", path(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0 0\n1 one\n").unwrap();
    let out = progx(&["fit", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));

    // too many columns for 2D points
    let xyz = dir.path().join("wide.txt");
    std::fs::write(&xyz, "0 0 0 0 0\n").unwrap();
    assert_eq!(progx(&["fit", path(&xyz)]).status.code(), Some(2));

    // a result whose labels exceed its instance count
    let result = dir.path().join("broken.json");
    std::fs::write(&result, "{\"instances\": [], \"labels\": [3]}").unwrap();
    let scene = star_scene(&dir, "6");
    assert_eq!(progx(&["eval", path(&result), "--scene", path(&scene)]).status.code(), Some(2));

    // eval needs ground truth
    let plain = dir.path().join("plain.txt");
    std::fs::write(&plain, "0 0\n1 1\n2 2\n").unwrap();
    let mut args = vec!["fit", path(&plain), "-o"];
    let ok = dir.path().join("ok.json");
    args.push(path(&ok));
    assert!(progx(&args).status.success());
    assert_eq!(progx(&["eval", path(&ok), "--scene", path(&plain)]).status.code(), Some(2));
}

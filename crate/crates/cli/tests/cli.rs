use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gsketch_core::io::read_sketch_file;
use gsketch_core::{GaussianSketch, PointSet};

fn gsketch(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsketch"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const SETS: &str = "{\"label\":\"a\",\"points\":[[0,0],[0.5,0.25],[-0.3,0.1]]}\n{\"label\":\"b\",\"points\":[[0.9,0.8],[0.7,1.0]]}\n";

#[test]
fn plan_prints_planner_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsketch(&["plan", "--variant", "gs", "--d", "2", "--radius", "1", "--alpha", "1e-3", "--epsilon", "0.5"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    // smallest s with 4·2·e^4·(2e/s)^s ≤ 1e-3
    assert_eq!(value(&text, "s"), "14");
    // ⌈32·2/0.25⌉
    assert_eq!(value(&text, "m"), "256");
    assert_eq!(value(&text, "variant"), "gs");
    assert_eq!(value(&text, "radius"), "1");
}

#[test]
fn plan_hd_uses_radius_as_norm_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsketch(&["plan", "--variant", "hd", "--d", "16", "--radius", "1"], dir.path());
    let text = stdout(&o);
    // smallest s with 4·e^2·(2e/s)^s ≤ 1e-3
    assert_eq!(value(&text, "s"), "13");
    assert_eq!(value(&text, "m").split(',').count(), 13);
    assert_eq!(value(&text, "m_rounded").split(',').next(), Some("128"));
}

#[test]
fn exact_distance_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p.csv", "0,0\n1,1\n0.25,-0.5\n");
    write(dir.path(), "q.csv", "0,0\n1,1\n0.25,-0.5\n");
    let o = gsketch(&["dist", "--exact-only", "p.csv", "q.csv"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "exact_dk2=0\n");
}

#[test]
fn sketch_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sets.jsonl", SETS);
    let a = gsketch(&["sketch", "sets.jsonl", "-o", "one.bin", "--seed", "7"], dir.path());
    let b = gsketch(&["sketch", "sets.jsonl", "-o", "two.bin", "--seed", "7"], dir.path());
    let c = gsketch(&["sketch", "sets.jsonl", "-o", "three.bin", "--seed", "7", "--threads", "1"], dir.path());
    assert!(a.status.success() && b.status.success() && c.status.success());
    assert_eq!(a.stdout, b.stdout);
    let one = fs::read(dir.path().join("one.bin")).unwrap();
    assert_eq!(one, fs::read(dir.path().join("two.bin")).unwrap());
    assert_eq!(one, fs::read(dir.path().join("three.bin")).unwrap());
    let d = gsketch(&["sketch", "sets.jsonl", "-o", "four.bin", "--seed", "8"], dir.path());
    assert!(d.status.success());
    assert_ne!(one, fs::read(dir.path().join("four.bin")).unwrap());
}

#[test]
fn sketch_file_holds_the_library_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sets.jsonl", SETS);
    let o = gsketch(&["sketch", "sets.jsonl", "-o", "s.bin", "--seed", "3", "--radius", "1"], dir.path());
    assert!(o.status.success());
    let file = read_sketch_file(&dir.path().join("s.bin")).unwrap();
    assert_eq!(value(&stdout(&o), "fingerprint"), file.config.fingerprint().to_string());
    let g = GaussianSketch::from_config(file.config.clone()).unwrap();
    let a = PointSet::from_rows(&[[0.0, 0.0], [0.5, 0.25], [-0.3, 0.1]]).unwrap();
    assert_eq!(file.embeddings[0], g.embed_set(&a).unwrap());
    assert_eq!(file.embeddings[1].count, 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "abc,1\n");
    write(dir.path(), "ok.csv", "1,2\n");
    assert_eq!(gsketch(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(gsketch(&["plan", "--d", "2"], dir.path()).status.code(), Some(2));
    assert_eq!(gsketch(&["dist", "ok.csv", "missing.csv"], dir.path()).status.code(), Some(1));
    let bad = gsketch(&["dist", "bad.csv", "ok.csv"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 1"));
    assert_eq!(gsketch(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn config_file_fills_missing_flags_only() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cfg.txt", "radius = 1\nepsilon = 0.25\nvariant = gs\n");
    let o = gsketch(&["plan", "--d", "2", "--config", "cfg.txt", "--epsilon", "0.5"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(value(&text, "epsilon"), "0.5");
    assert_eq!(value(&text, "radius"), "1");
}

#[test]
fn bandwidth_rescales_inputs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p.csv", "0,0\n2,2\n");
    write(dir.path(), "q.csv", "1,0\n2,-1\n");
    write(dir.path(), "p_half.csv", "0,0\n1,1\n");
    write(dir.path(), "q_half.csv", "0.5,0\n1,-0.5\n");
    let scaled = gsketch(&["dist", "p.csv", "q.csv", "--bandwidth", "2"], dir.path());
    let manual = gsketch(&["dist", "p_half.csv", "q_half.csv"], dir.path());
    assert!(scaled.status.success());
    assert_eq!(stdout(&scaled), stdout(&manual));
}

#[test]
fn test2_and_nn_report() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "sets.jsonl", SETS);
    write(dir.path(), "p.csv", "0,0\n0.1,0.2\n-0.2,0.1\n0.3,-0.1\n");
    let t = gsketch(&["test2", "p.csv", "p.csv", "--trials", "30", "--resample", "permutation"], dir.path());
    assert!(t.status.success());
    let text = stdout(&t);
    assert_eq!(value(&text, "statistic"), "0");
    assert_eq!(value(&text, "reject"), "false");
    assert_eq!(value(&text, "resample_mode"), "permutation");
    let n = gsketch(&["nn", "--index", "sets.jsonl", "--query", "sets.jsonl"], dir.path());
    assert!(n.status.success());
    let lines: Vec<String> = stdout(&n).lines().map(String::from).collect();
    assert!(lines[0].starts_with("query=a nearest=a index=0"));
    assert!(lines[1].starts_with("query=b nearest=b index=1"));
}

#[test]
fn kpca_writes_orthonormal_csv() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "x.csv", "0,0\n0.5,0.5\n-0.5,0.2\n0.9,-0.3\n-0.1,-0.8\n");
    let o = gsketch(&["kpca", "x.csv", "--k", "2", "-o", "v.csv", "--verify"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let residual: f64 = value(&text, "residual").parse().unwrap();
    let bound: f64 = value(&text, "bound").parse().unwrap();
    assert!(residual <= bound);
    let rows: Vec<Vec<f64>> = fs::read_to_string(dir.path().join("v.csv"))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!((rows.len(), rows[0].len()), (5, 2));
    let gram = |a: usize, b: usize| rows.iter().map(|r| r[a] * r[b]).sum::<f64>();
    assert!((gram(0, 0) - 1.0).abs() < 1e-10 && (gram(1, 1) - 1.0).abs() < 1e-10 && gram(0, 1).abs() < 1e-10);
}

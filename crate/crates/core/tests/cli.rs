use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const AIRY: &str = "cutoff = 1000.0\n[potential]\ncoefficients = [\"x\", \"0\"]\n";

fn exe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exact-wkb")).args(args).output().expect("binary runs")
}

fn problem(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("problem.toml");
    fs::write(&p, body).unwrap();
    p
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn run_ok(args: &[&str]) {
    let out = exe(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn airy_trace_and_regions() {
    let tmp = tempfile::tempdir().unwrap();
    let p = problem(tmp.path(), AIRY);
    let out = tmp.path().join("out");
    run_ok(&["regions", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    run_ok(&["trace", p.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "both"]);

    let trace = json(out.join("trace.json"));
    assert_eq!(trace["turning_points"].as_array().unwrap().len(), 1);
    assert_eq!(trace["curves"].as_array().unwrap().len(), 3);

    let regions = json(out.join("regions.json"));
    assert_eq!(regions["arrangement"]["regions"].as_array().unwrap().len(), 3);

    let svg = fs::read_to_string(out.join("trace.svg")).unwrap();
    assert_eq!(svg.matches("<path").count(), 3);
    assert_eq!(svg.matches("class=\"turning-point\"").count(), 1);
}

#[test]
fn constant_potential_gives_empty_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let p = problem(tmp.path(), "cutoff = 2.0\n[potential]\ncoefficients = [\"1\", \"0\"]\n");
    let out = tmp.path().join("out");
    run_ok(&["regions", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let regions = json(out.join("regions.json"));
    assert!(regions["curves"].as_array().unwrap().is_empty());
    assert_eq!(regions["arrangement"]["regions"].as_array().unwrap().len(), 1);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = problem(tmp.path(), "cutoff = 2.0\n[potential]\ncoefficients = [\"x +* 1\", \"0\"]\n");
    assert_eq!(exe(&["trace", bad.to_str().unwrap()]).status.code(), Some(2));
    let missing = tmp.path().join("missing.toml");
    assert_eq!(exe(&["trace", missing.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(exe(&["trace"]).status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let p = problem(tmp.path(), "theta = 0.3\ncutoff = 3.0\n[potential]\ncoefficients = [\"-x^2\", \"3\", \"0\"]\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["all", p.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run_ok(&["all", p.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 5);
    for name in names {
        let (x, y) = (fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
        if name == "problem.toml" {
            // Only the output directory differs.
            let strip = |s: Vec<u8>| String::from_utf8(s).unwrap().lines().filter(|l| !l.starts_with("dir =")).collect::<Vec<_>>().join("\n");
            assert_eq!(strip(x), strip(y));
        } else {
            assert!(x == y, "{name:?} differs between runs");
        }
    }
}

#[test]
fn sample_problems_run() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems");
    let tmp = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = tmp.path().join(path.file_stem().unwrap());
            run_ok(&["all", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            assert!(out.join("problem.toml").exists());
        }
    }
}

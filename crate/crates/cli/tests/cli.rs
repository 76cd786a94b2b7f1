use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn amg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amg")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("amg-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identical_configs_give_identical_bytes() {
    let args = ["sweep", "--kind", "poisson2d", "--sizes", "12,20", "--pre", "none,0.2", "--degree", "2"];
    let a = amg(&args);
    let b = amg(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("kind,n,unknowns,psi,method"));
}

#[test]
fn config_file_with_flag_precedence() {
    let cfg = scratch("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"kind": "aniso3d", "n": 8}, "setup": {"interp": {"degree": 2}}, "output": {"format": "json"}}"#,
    )
    .unwrap();
    let out = amg(&["solve", "--config", s(&cfg), "--n", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["kind"], "aniso3d");
    assert_eq!(v[0]["n"], 10);
    assert_eq!(v[0]["degree"], 2);
}

#[test]
fn exit_codes() {
    let out = amg(&["solve", "--kind", "poisson2d", "--n", "24", "--max-iters", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = amg(&["solve", "--kind", "poisson2d", "--set", "solve.tol=0"]);
    assert_eq!(out.status.code(), Some(1));
    let bad = scratch("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = amg(&["solve", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let out = amg(&["setup", "--set", "setup.nonexistent=1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_passes() {
    let out = amg(&["verify", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 4 && !text.contains("FAIL"));
}

#[test]
fn generated_matrix_solves_from_file_and_reports() {
    let stem = scratch("rot");
    let out = amg(&["generate", "--kind", "rotated_aniso2d", "--n", "16", "--psi", "0.5", "--out", s(&stem)]);
    assert_eq!(out.status.code(), Some(0));
    let mtx = stem.with_extension("mtx");
    let rec = scratch("rec.csv");
    let out = amg(&["solve", "--matrix", s(&mtx), "--output", s(&rec)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&rec).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("matrix,256,256,"));
    let out = amg(&["report", s(&rec)]);
    assert_eq!(out.status.code(), Some(0));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().next().unwrap().contains("SC"));
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn setup_lists_levels() {
    let out = amg(&["setup", "--kind", "poisson2d", "--n", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("level,n,nnz_a,nnz_p,nnz_r"));
    assert!(lines.next().unwrap().starts_with("0,1024,"));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn iskak(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iskak"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("ISKAK_THREADS")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

#[test]
fn dispersion_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = iskak(&["dispersion", "--config", &config("dispersion.toml")], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("dispersion.csv")).unwrap();
    assert!(csv.starts_with("x,c_ik2,c_ww2,diff,in_fit\n"));
    let summary = std::fs::read_to_string(dir.path().join("dispersion.summary.txt")).unwrap();
    assert!(summary.contains("[PASS] dispersion slope") && summary.ends_with("overall: PASS\n"));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["elliptic-suite", "--config", &config("elliptic.toml"), "--override", "elliptic.trials=8", "--seed", "11"];
    assert_eq!(iskak(&args, a.path()).status.code(), Some(0));
    assert_eq!(iskak(&args, b.path()).status.code(), Some(0));
    let read = |d: &Path| std::fs::read(d.join("elliptic-suite.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));

    let c = tempfile::tempdir().unwrap();
    let other = ["elliptic-suite", "--config", &config("elliptic.toml"), "--override", "elliptic.trials=8", "--seed", "12"];
    assert_eq!(iskak(&other, c.path()).status.code(), Some(0));
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn unknown_key_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"dispersion\"\n[grid]\nn_pts = 64\n").unwrap();
    let out = iskak(&["dispersion", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_pts"));
}

#[test]
fn overrides_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = iskak(
        &["consistency", "--config", &config("consistency.toml"), "--override", "grid.n_points=64", "--override", "model.delta_list=[0.4, 0.3]"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("consistency.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("64")));
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = iskak(
        &["dispersion", "--config", &config("dispersion.toml"), "--override", "dispersion.reference_value=1e-3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL reference gap"));
}

#[test]
fn mismatched_experiment_and_bad_threads_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = iskak(&["dtn", "--config", &config("dispersion.toml")], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_iskak"))
        .args(["dispersion", "--config", &config("dispersion.toml"), "--output-dir"])
        .arg(dir.path())
        .env("ISKAK_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ISKAK_THREADS"));
}

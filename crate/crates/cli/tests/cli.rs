use std::path::Path;
use std::process::{Command, Output};

fn rtphd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtphd")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn dump_default(dir: &Path) -> String {
    let path = dir.join("scenario.toml");
    let o = rtphd(&["dump-config", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    path.to_str().unwrap().to_string()
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dump_default(dir.path());
    let o = rtphd(&["dump-config", "--config", &path]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        std::fs::read_to_string(&path).unwrap()
    );
}

#[test]
fn run_writes_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = dump_default(dir.path());
    // Shorten the horizon so the run is quick.
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replacen("horizon = 100", "horizon = 15", 1);
    std::fs::write(&config, text).unwrap();
    let out = dir.path().join("results");
    let o = rtphd(&[
        "run",
        "--config",
        &config,
        "--runs",
        "2",
        "-L",
        "1,5",
        "--serial",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.contains("mean_tm=")).count(), 4);
    for f in ["summary.csv", "runtime.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4 * 15);
}

#[test]
fn bad_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = dump_default(dir.path());
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replacen("k_beta = 1.1", "k_beta = \"x\"", 1);
    std::fs::write(&config, text).unwrap();
    let o = rtphd(&["run", "--config", &config]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error:") && err.contains("line"), "{err}");
}

#[test]
fn missing_config_is_an_error() {
    let o = rtphd(&["run", "--config", "/nonexistent/scenario.toml"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/scenario.toml"));
}

#[test]
fn export_tracks_checks_the_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tracks.xml");
    let o = rtphd(&[
        "export-tracks",
        "--default",
        "--format",
        "xml",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("xml"));
    assert!(!out.exists());
}

#[test]
fn export_tracks_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tracks.json");
    let o = rtphd(&[
        "export-tracks",
        "--default",
        "--variant",
        "baseline",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(rows.iter().any(|r| r["source"] == "truth") && rows.iter().any(|r| r["source"] == "estimate"));
}

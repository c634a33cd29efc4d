use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn cdlr(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cdlr"));
    cmd.args(args);
    for (flag, path) in paths {
        cmd.arg(flag).arg(path);
    }
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "cdlr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn simulate_analyze_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs");
    cdlr(
        &["simulate", "--participants", "2"],
        &[("--corpus", &corpus()), ("--out", &logs)],
    );
    let names: Vec<_> = std::fs::read_dir(&logs).unwrap().collect();
    assert_eq!(names.len(), 18);

    let report = dir.path().join("report.json");
    let csv = dir.path().join("workflow.csv");
    cdlr(
        &["analyze"],
        &[
            ("--logs", &logs),
            ("--corpus", &corpus()),
            ("--out", &report),
            ("--csv", &csv),
        ],
    );
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["sessions"].as_array().unwrap().len(), 18);
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 1);

    let one = std::fs::read_dir(&logs)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| {
            p.file_name()
                .unwrap()
                .to_string_lossy()
                .starts_with("p0_t0_")
        })
        .unwrap();
    let out = cdlr(&["replay", one.to_str().unwrap()], &[]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("digest "), "{stdout}");
    assert!(stdout.contains("\"keystrokes\""), "{stdout}");
}

#[test]
fn plan_prints_the_counterbalanced_order() {
    let out = cdlr(&["plan", "--participant", "4"], &[]);
    let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(plan["tasks"].as_array().unwrap().len(), 9);
}

#[test]
fn analyze_rejects_an_empty_log_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cdlr"))
        .arg("analyze")
        .args(["--logs".as_ref(), dir.path().as_os_str()])
        .args(["--corpus".as_ref(), corpus().as_os_str()])
        .args(["--out".as_ref(), dir.path().join("r.json").as_os_str()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no .jsonl logs"));
}

use std::path::PathBuf;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "scenarios", &format!("{name}.scenario")]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn out_dir(dir: &tempfile::TempDir) -> &str {
    dir.path().to_str().unwrap()
}

#[test]
fn missing_file_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["run", "/nonexistent/x.scenario", "--out", out_dir(&dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn invalid_scenario_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scenario");
    std::fs::write(&path, "[run]\ndt = -1.0\n").unwrap();
    let out = sim(&["run", path.to_str().unwrap(), "--out", out_dir(&dir)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_the_three_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["run", &scenario("join_tail"), "--out", out_dir(&dir)]);
    assert_eq!(out.status.code(), Some(0));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("tick,time,v1.s,"));
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("collided = false"), "{report}");
    let log = std::fs::read_to_string(dir.path().join("events.log")).unwrap();
    assert!(log.contains("JoinTail completed"));
}

#[test]
fn integrated_run_logs_its_completions() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["run", &scenario("integrated"), "--out", out_dir(&dir)]);
    assert_eq!(out.status.code(), Some(0));
    let log = std::fs::read_to_string(dir.path().join("events.log")).unwrap();
    for m in ["JoinTail", "JoinMiddle", "AEBHead", "CutIn", "AEBMiddle", "LeaveMiddle", "LeaveTail"] {
        assert!(log.contains(&format!("v1    maneuver {m} completed")), "{m}");
    }
}

#[test]
fn radar_fault_without_degradation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["run", &scenario("radar_fault"), "--out", out_dir(&dir), "--no-degradation"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("collision v2 / v3"));
}

#[test]
fn duration_and_dt_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["run", &scenario("steady"), "--out", out_dir(&dir), "--duration", "2", "--dt", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("20 ticks"));
}

#[test]
fn compare_without_fault_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["compare", &scenario("steady"), "--out", out_dir(&dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NoFault"));
}

#[test]
fn compare_reports_the_collision_without_degradation() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(&["compare", &scenario("radar_fault"), "--out", out_dir(&dir)]);
    assert_eq!(out.status.code(), Some(0));
    let summary = std::fs::read_to_string(dir.path().join("comparison.txt")).unwrap();
    assert!(summary.contains("degraded: no collision"));
    assert!(summary.contains("not degraded: collision v2 / v3 at"));
    assert!(dir.path().join("degradation_on/trace.csv").exists());
    assert!(dir.path().join("degradation_off/trace.csv").exists());
}

#[test]
fn accept_passes_and_is_repeatable() {
    let a = sim(&["accept"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    let b = sim(&["accept"]);
    let strip = |o: &Output| {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .map(|l| l.split("; ran in").next().unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
}

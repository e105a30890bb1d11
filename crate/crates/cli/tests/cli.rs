use std::path::Path;
use std::process::{Command, Output};

fn hicf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hicf")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn emitted_preset_runs_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hicf(&["preset", "perturbed", "--emit-config"], tmp.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("[flow]") && text.contains("kind = \"legendre\""));
    std::fs::write(tmp.path().join("run.toml"), text).unwrap();

    let out = hicf(&["run", "run.toml", "--out", "res", "--resolution", "16", "--t-end", "1"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("barrier_envelope"));
    let csv = std::fs::read_to_string(tmp.path().join("res/series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
    // snapshots after the shortened end time are dropped
    assert_eq!(std::fs::read_dir(tmp.path().join("res/snapshots")).unwrap().count(), 1);
}

#[test]
fn bad_config_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[flow]\nn = 2\np = 2\nF = \"mean\"\ncone = \"mean_halfspace\"\n").unwrap();
    let out = hicf(&["run", "bad.toml"], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5"), "{err}");
}

#[test]
fn barrier_prints_closed_form_for_p1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hicf(&["barrier", "--n", "2", "--p", "1", "--r0", "1", "--t-end", "2", "--samples", "4"], tmp.path());
    assert!(out.status.success());
    let text = stdout(&out);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 2.0);
    assert!((last[1] - 1.8782301658116514).abs() < 1e-9);
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn unknown_preset_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(!hicf(&["preset", "torus"], tmp.path()).status.success());
}

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_viscwave");

const SHORT_RUN: &str = "\
[model]
alpha = 3.0
epsilon = 1.0

[grid]
n_modes = 16
n_z = 64

[time]
dt = 0.01
t_final = 0.1

[initial]
preset = \"small_two_mode\"
amplitude = 0.01

[output]
cadence = 2
";

fn run_with(config: &str, out: &Path) -> Output {
    let cfg = out.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .args(["run", "--config"])
        .arg(&cfg)
        .env("VISCWAVE_OUT_DIR", out.join("results"))
        .output()
        .unwrap()
}

fn verdicts(stdout: &[u8]) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn short_run_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(SHORT_RUN, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let res = dir.path().join("results");
    for f in ["series.csv", "snapshots.jsonl", "verdicts.jsonl", "summary.json"] {
        assert!(res.join(f).is_file(), "{f}");
    }
    assert!(!res.join("failure_state.json").exists());
    let series = std::fs::read_to_string(res.join("series.csv")).unwrap();
    assert!(series.starts_with("# viscwave series v1"));
    // t = 0 plus every second step of ten
    assert_eq!(series.lines().filter(|l| !l.starts_with('#')).count(), 1 + 1 + 5);
    let v = verdicts(&out.stdout);
    assert!(v.iter().any(|x| x["property"] == "mean_conservation" && x["holds"] == true));
}

#[test]
fn violated_property_exits_one() {
    let text = SHORT_RUN
        .replace("preset = \"small_two_mode\"\namplitude = 0.01", "preset = \"explicit\"\nh = [[1, 0.2, 0.0]]\nxi = [[1, 0.0, 0.2]]");
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&text, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let v = verdicts(&out.stdout);
    assert!(v.iter().any(|x| x["property"] == "smallness" && x["holds"] == false));
}

#[test]
fn config_error_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&SHORT_RUN.replace("n_modes = 16", "n_modes = 17"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 6"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&SHORT_RUN.replace("cadence = 2", "cadence = 2\nbogus = 1"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 19"));
}

#[test]
fn zero_data_stays_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&SHORT_RUN.replace("small_two_mode", "zero").replace("amplitude = 0.01\n", ""), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let snaps = std::fs::read_to_string(dir.path().join("results/snapshots.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(snaps.lines().last().unwrap()).unwrap();
    for field in ["h", "xi"] {
        for c in last[field].as_array().unwrap() {
            assert_eq!(c[0].as_f64().unwrap(), 0.0);
            assert_eq!(c[1].as_f64().unwrap(), 0.0);
        }
    }
}

#[test]
fn linear_validate_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["linear-validate", "--modes", "1,2", "--t-final", "0.2", "--dt", "0.01", "--out"])
        .arg(dir.path())
        .env_remove("VISCWAVE_OUT_DIR")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("linear.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn repeated_runs_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_with(SHORT_RUN, a.path());
    run_with(SHORT_RUN, b.path());
    for f in ["series.csv", "snapshots.jsonl", "verdicts.jsonl"] {
        let x = std::fs::read(a.path().join("results").join(f)).unwrap();
        let y = std::fs::read(b.path().join("results").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn missing_config_file_exits_two() {
    let out = Command::new(BIN).args(["run", "--config", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

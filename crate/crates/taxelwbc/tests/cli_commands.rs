use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_taxelwbc"));
    c.env_remove("TAXELWBC_CONFIG_DIR");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn collision_summary_reports_taxel_one_only() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["run", "--scenario", "collision", "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(out.path());
    for key in ["peak_taxel_force", "peak_applied_force"] {
        let peaks: Vec<f64> = s[key].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(peaks.len(), 11);
        assert!(peaks[0] > 0.0, "{key}: {peaks:?}");
        assert!(peaks[1..].iter().all(|p| *p == 0.0), "{key}: {peaks:?}");
    }
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("T1 ") && !text.contains("T2 "), "{text}");
}

#[test]
fn impedance_demo_row_count_is_duration_over_dt() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["run", "--scenario", "impedance_demo", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.path().join("log.csv")).unwrap();
    assert_eq!(csv.lines().count() - 1, 30_000);
    let jsonl = fs::read_to_string(out.path().join("log.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 30_000);
    assert_eq!(summary(out.path())["rows"], 30_000);
}

#[test]
fn same_seed_is_byte_identical_and_seed_matters() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, seed) in dirs.iter().zip(["3", "3", "4"]) {
        let o = run(&["run", "--scenario", "impedance_demo", "--seed", seed, "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success());
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("log.csv")).unwrap();
    assert!(read(&dirs[0]) == read(&dirs[1]), "same seed must reproduce the log");
    assert!(read(&dirs[0]) != read(&dirs[2]), "taxel noise depends on the seed");
}

#[test]
fn golden_log_is_reproduced() {
    let out = tempfile::tempdir().unwrap();
    let scenario = fixture("golden.toml");
    let o = run(&["run", "--scenario", scenario.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let produced = fs::read(out.path().join("log.csv")).unwrap();
    let golden = fs::read(fixture("golden_log.csv")).unwrap();
    assert!(produced == golden, "log differs from tests/fixtures/golden_log.csv");
}

#[test]
fn replay_reemits_the_run_summary() {
    let o = run(&["replay", "--json", fixture("golden_log.csv").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let golden = fs::read_to_string(fixture("golden_summary.json")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), golden);

    let out = tempfile::tempdir().unwrap();
    assert!(run(&["run", "--scenario", "follow_me_demo", "--out", out.path().to_str().unwrap()]).status.success());
    let o = run(&["replay", "--json", out.path().join("log.csv").to_str().unwrap()]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), fs::read_to_string(out.path().join("summary.json")).unwrap());
}

#[test]
fn config_errors_exit_two_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let gains = dir.path().join("gains.toml");
    fs::write(&gains, "[weights]\neta_arm = 1.0\neta_base = \"stiff\"\n").unwrap();
    let o = run(&["run", "--scenario", "collision", "--gains", gains.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("gains.toml:3:"), "{err}");

    fs::write(&gains, "[weights]\neta_base = 0.0\n").unwrap();
    let o = run(&["run", "--scenario", "collision", "--gains", gains.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("field `weights`"));

    let o = run(&["run", "--scenario", "no_such_scenario"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["replay", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let gains = dir.path().join("gains.toml");
    fs::write(&gains, "[cartesian]\nstiffness = 1e9\ndamping = 0.0\n").unwrap();
    let o = run(&[
        "run",
        "--scenario",
        "collision",
        "--gains",
        gains.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stderr).unwrap().contains("diverged"));
}

#[test]
fn config_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixture("golden.toml"), dir.path().join("mine.toml")).unwrap();
    let out = dir.path().join("out");
    let o = bin()
        .args(["run", "--scenario", "mine", "--out", out.to_str().unwrap()])
        .env("TAXELWBC_CONFIG_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(out.join("log.csv")).unwrap(), fs::read(fixture("golden_log.csv")).unwrap());
}

#[test]
fn calibrate_prints_table_and_selection() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let o = run(&["calibrate", "--out", json.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("CC Foam") && text.contains("NA"), "{text}");
    assert!(text.trim_end().ends_with("selected: PU Foam LD30"), "{text}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["selected"], "PU Foam LD30");
    assert_eq!(v["materials"][1]["max_deformation_mm"], serde_json::Value::Null);
    assert_eq!(v["materials"][0]["max_raw_variation"], 84.0);
}

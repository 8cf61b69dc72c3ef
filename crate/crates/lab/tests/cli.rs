use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gplab::{ExperimentConfig, ExperimentKind, ResultRecord};

fn gplab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gplab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_record(dir: &Path) -> ResultRecord {
    serde_json::from_slice(&fs::read(dir.join("record.json")).unwrap()).unwrap()
}

#[test]
fn graphs_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = gplab(&["graphs"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = read_record(dir.path());
    assert_eq!(rec.config.kind, ExperimentKind::Graphs);
    assert!(rec.passed(true));
    let csv = fs::read_to_string(dir.path().join("graphs_counts.csv")).unwrap();
    assert!(csv.starts_with("k,m,count,bound,summands,power_total"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[pass] graphs_valid"));
}

#[test]
fn overrides_reach_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = gplab(&["scattering", "--v0", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_record(dir.path()).config.v0, 1.5);
}

#[test]
fn config_file_is_loaded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        k_max: 2,
        m_max: 3,
        ..ExperimentConfig::canonical(ExperimentKind::Graphs)
    };
    let path = dir.path().join("graphs.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    let out = gplab(&["graphs", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = read_record(dir.path());
    assert_eq!((rec.config.k_max, rec.config.m_max), (2, 3));
}

#[test]
fn failed_assertion_exits_one() {
    // A box of half-width 2 squeezes the unit oscillator ground state.
    let dir = tempfile::tempdir().unwrap();
    let out = gplab(&["gp", "--minimize", "--length", "4"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] harmonic_ground_energy"));
}

#[test]
fn bad_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "kind = \"graphs\"\nbogus = 1\n").unwrap();
    let out = gplab(&["graphs", "--config", unknown.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let wrong_kind = dir.path().join("wrong.toml");
    fs::write(&wrong_kind, "kind = \"gp_evolve\"\n").unwrap();
    let out = gplab(&["graphs", "--config", wrong_kind.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not belong"));

    let out = gplab(&["scattering", "--dt=-1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        assert_eq!(gplab(&["scattering"], dir.path()).status.code(), Some(0));
    }
    assert_eq!(read_record(a.path()).metrics_bytes(), read_record(b.path()).metrics_bytes());
    let csv = |d: &Path| fs::read(d.join("scattering_profile.csv")).unwrap();
    assert_eq!(csv(a.path()), csv(b.path()));
}

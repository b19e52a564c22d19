use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/synthetic_city/config.json")
}

fn sightline(args: &[&str], stage_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sightline"))
        .args(args)
        .arg("--stage-dir")
        .arg(stage_dir)
        .output()
        .unwrap()
}

fn with_config(args: &[&str], stage_dir: &Path) -> Output {
    let config = fixture_config();
    let mut all = args.to_vec();
    all.extend(["--config", config.to_str().unwrap()]);
    sightline(&all, stage_dir)
}

#[test]
fn run_all_then_report_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = with_config(&["run-all"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let listed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        listed
            .lines()
            .filter(|l| l.ends_with(".json") && !l.starts_with("report"))
            .count(),
        5
    );
    for f in ["report.json", "report.txt", "visibility.geojson", "modeling_table.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }

    let out = sightline(&["report", "--format", "json", "--model", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["models"]["model_2"]["coefficients"].is_array());
    assert!(report["models"].get("model_1").is_none_or(|m| m.is_null()));

    let out = sightline(&["export-geojson"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let geo: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(geo["type"], "FeatureCollection");
}

#[test]
fn repeated_runs_print_identical_reports() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        assert_eq!(with_config(&["run-all"], d).status.code(), Some(0));
    }
    let ra = sightline(&["report", "--format", "text"], a.path());
    let rb = sightline(&["report", "--format", "text"], b.path());
    assert!(!ra.stdout.is_empty());
    assert_eq!(ra.stdout, rb.stdout);
}

#[test]
fn stages_run_one_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["ingest", "network", "visibility"] {
        let out = with_config(&[cmd], dir.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = with_config(&["fit"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("assign"));
    assert_eq!(with_config(&["assign"], dir.path()).status.code(), Some(0));
    assert_eq!(with_config(&["fit"], dir.path()).status.code(), Some(0));
}

#[test]
fn invalid_usage_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sightline(&["run-all", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(
        sightline(&["report", "--model", "3"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(sightline(&["ingest"], dir.path()).status.code(), Some(1));
    assert_eq!(sightline(&["report"], dir.path()).status.code(), Some(1));
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::copy(fixture_config(), &config).unwrap();
    let out = sightline(
        &["ingest", "--config", config.to_str().unwrap()],
        &dir.path().join("stages"),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("city.osm"));
}

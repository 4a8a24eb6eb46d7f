use std::path::Path;
use std::process::{Command, Output};

fn solarsite(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solarsite"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth_small(dir: &Path, seed: &str) {
    let o = solarsite(
        &["synth", "--rows", "40", "--cols", "48", "--seed", seed, "--out", "ds"],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn synth_then_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    synth_small(tmp.path(), "7");
    let o = solarsite(&["run", "ds/approach1.toml", "--out", "run1"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("full_km2"));
    for f in [
        "score.asc",
        "classes.asc",
        "classes_exploitable.asc",
        "areas.csv",
        "sensitivity.csv",
        "class_map.png",
        "metadata.json",
    ] {
        assert!(tmp.path().join("run1").join(f).is_file(), "{f}");
    }
}

#[test]
fn run_defaults_to_config_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    synth_small(tmp.path(), "7");
    let o = solarsite(&["run", "ds/approach2.toml"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("ds/out/approach2/areas.csv").is_file());
}

#[test]
fn json_summary_parses() {
    let tmp = tempfile::tempdir().unwrap();
    synth_small(tmp.path(), "3");
    let o = solarsite(&["run", "ds/approach3.toml", "--out", "r", "--json"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["classes"].as_array().unwrap().len(), 4);
}

#[test]
fn synth_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    synth_small(&a, "42");
    synth_small(&b, "42");
    for entry in std::fs::read_dir(a.join("ds")).unwrap() {
        let entry = entry.unwrap();
        let other = b.join("ds").join(entry.file_name());
        assert_eq!(std::fs::read(entry.path()).unwrap(), std::fs::read(other).unwrap());
    }
}

#[test]
fn ahp_reports_consistency_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("ok.txt"), "3\n1 3 5\n1/3 1 3\n1/5 1/3 1\n").unwrap();
    let o = solarsite(&["ahp", "ok.txt"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("consistent"));

    std::fs::write(
        tmp.path().join("cycle.json"),
        r#"[[1, 9, "1/9"], ["1/9", 1, 9], [9, "1/9", 1]]"#,
    )
    .unwrap();
    let o = solarsite(&["ahp", "cycle.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CR ="));
    let o = solarsite(&["ahp", "cycle.json", "--override-cr"], tmp.path());
    assert!(o.status.success());

    std::fs::write(tmp.path().join("bad.txt"), "2\n1 0\n1 1\n").unwrap();
    let o = solarsite(&["ahp", "bad.txt"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ahp_json_output() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("id.txt"), "3\n1 1 1\n1 1 1\n1 1 1\n").unwrap();
    let o = solarsite(&["ahp", "id.txt", "--json"], tmp.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cr"].as_f64(), Some(0.0));
    assert_eq!(v["consistent"].as_bool(), Some(true));
}

#[test]
fn invalid_config_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "criteria = []\nunknown = 1\n").unwrap();
    let o = solarsite(&["run", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = solarsite(&["run", "missing.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    synth_small(tmp.path(), "7");
    std::fs::write(tmp.path().join("blocker"), "file, not a directory").unwrap();
    let o = solarsite(&["run", "ds/approach1.toml", "--out", "blocker/run"], tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn sensitivity_lists_every_criterion_but_ghi() {
    let tmp = tempfile::tempdir().unwrap();
    synth_small(tmp.path(), "7");
    let o = solarsite(&["sensitivity", "ds/approach1.toml", "--out", "sens"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("sens/sensitivity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(!csv.lines().skip(1).any(|l| l.starts_with("GHI")));
}

#[test]
fn render_writes_png() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("c.asc"),
        "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 4\n",
    )
    .unwrap();
    let o = solarsite(&["render", "c.asc", "--out", "c.png"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = std::fs::read(tmp.path().join("c.png")).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
}

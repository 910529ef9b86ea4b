use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_slide-ds"));
    cmd.env_remove("SLIDE_DS_SEED");
    cmd
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_json(dir: &Path, name: &str, doc: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    path
}

fn load(name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(scenario(name)).unwrap()).unwrap()
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", scenario("release.json").to_str().unwrap(), "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for f in ["trace.csv", "metrics.json", "plot_data.csv"] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
}

#[test]
fn missing_key_is_a_parse_error_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let mut doc = load("release.json");
    doc["controller"]
        .as_object_mut()
        .unwrap()
        .remove("f_n_limit_newtons");
    let path = write_json(tmp.path(), "bad.json", &doc);
    let out = bin()
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("f_n_limit_newtons"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn malformed_json_and_missing_file_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.json");
    fs::write(&path, "{ \"name\": ").unwrap();
    let out = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin()
        .arg("run")
        .arg(tmp.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_axis_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "sweep",
            scenario("release.json").to_str().unwrap(),
            "--axis",
            "attractor.v_max_mps=",
        ])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn unknown_override_key_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "sweep",
            scenario("release.json").to_str().unwrap(),
            "--axis",
            "nothing.here=1",
        ])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nothing"), "{}", stderr(&out));
}

#[test]
fn unwritable_output_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = bin()
        .args([
            "run",
            scenario("empty_world.json").to_str().unwrap(),
            "--out",
        ])
        .arg(&blocker)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn sweep_shape_and_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "sweep",
            scenario("multi_speed.json").to_str().unwrap(),
            "--axis",
            "attractor.v_max_mps=0.5,0.75,1.0,1.25",
            "--reps",
            "5",
            "--out",
        ])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let runs = fs::read_dir(tmp.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().join("trace.csv").is_file())
        .count();
    assert_eq!(runs, 20);
    let mut reader = csv::Reader::from_path(tmp.path().join("metrics.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "condition");
    assert!(headers.iter().any(|h| h == "mean_slide_force_newtons_mean"));
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(&row[1], "5");
    }
}

#[test]
fn metrics_from_trace_reproduce_run_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "run",
            scenario("fig3_adversarial.json").to_str().unwrap(),
            "--out",
        ])
        .arg(tmp.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let out = bin()
        .arg("metrics")
        .arg(tmp.path().join("trace.csv"))
        .args([
            "--f-n",
            "45",
            "--attractor",
            "6,0",
            "--planner-offset",
            "0.3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let recomputed: Value = serde_json::from_slice(&out.stdout).unwrap();
    let stored: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(recomputed, stored);
}

#[test]
fn seed_env_overrides_scenario_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut doc = load("head_on.json");
    doc["sim"]["sensor_noise_std_newtons"] = 0.5.into();
    let path = write_json(tmp.path(), "noisy.json", &doc);
    let trace = |dir: &str, seed: Option<&str>| {
        let mut cmd = bin();
        if let Some(s) = seed {
            cmd.env("SLIDE_DS_SEED", s);
        }
        let status = cmd
            .arg("run")
            .arg(&path)
            .arg("--out")
            .arg(tmp.path().join(dir))
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        fs::read(tmp.path().join(dir).join("trace.csv")).unwrap()
    };
    let scenario_seed = doc["sim"]["seed"].to_string();
    let base = trace("base", None);
    assert_eq!(base, trace("same", Some(&scenario_seed)));
    assert_ne!(base, trace("other", Some("12345")));
    assert_eq!(
        trace("other2", Some("12345")),
        trace("other3", Some("12345"))
    );
}

#[test]
fn help_exits_zero_and_bad_usage_exits_one() {
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(
        bin().arg("frobnicate").output().unwrap().status.code(),
        Some(1)
    );
    assert_eq!(
        bin()
            .arg("sweep")
            .arg("x.json")
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frachom"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

fn exec(command: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let status = bin()
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    status.status.code().unwrap()
}

fn shipped(name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(configs().join(name)).unwrap()).unwrap()
}

fn small_sweep(profile: Value, a_star_override: Option<f64>) -> Value {
    let mut cfg = shipped("sweep_constant.json");
    cfg["sweep"]["profile"] = profile;
    cfg["sweep"]["nodes_per_axis"] = json!(128);
    if let Some(a) = a_star_override {
        cfg["sweep"]["a_star_override"] = json!(a);
    }
    cfg
}

#[test]
fn shipped_configs_validate() {
    let tmp = tempfile::tempdir().unwrap();
    let mut count = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        if cfg["command"] == "validate" {
            continue;
        }
        assert_eq!(exec("validate", &path, tmp.path(), &[]), 0, "{}", path.display());
        count += 1;
    }
    assert!(count >= 6);
    // schema validation writes nothing
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn constant_sweep_passes_with_vanishing_gaps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small_sweep(json!({"family": "constant", "value": 1.5}), None));
    let out = tmp.path().join("out");
    assert_eq!(exec("sweep", &cfg, &out, &[]), 0);
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[0], "epsilon");
    let gap_cols: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.contains("gap")).map(|(i, _)| i).collect();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3, "one row per epsilon");
    for row in &rows {
        for &c in &gap_cols {
            assert!(row[c].parse::<f64>().unwrap() < 1e-9, "{} = {}", &header[c], &row[c]);
        }
    }
    let verdicts: Value = serde_json::from_str(&fs::read_to_string(out.join("verdicts.json")).unwrap()).unwrap();
    assert_eq!(verdicts["passed"], true);
    let manifest = fs::read_to_string(out.join("MANIFEST")).unwrap();
    assert!(manifest.starts_with("config_sha256 "));
    for f in ["sweep.csv", "sweep.json", "verdicts.json"] {
        assert!(manifest.lines().any(|l| l.starts_with(&format!("{f} "))), "{f} missing from manifest");
    }
}

#[test]
fn negative_control_fails_with_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n.json", &small_sweep(json!({"family": "constant", "value": 1.5}), Some(2.0)));
    assert_eq!(exec("sweep", &cfg, &tmp.path().join("out"), &[]), 1);
    let verdicts: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/verdicts.json")).unwrap()).unwrap();
    assert_eq!(verdicts["verdicts"]["energy"], false);
}

#[test]
fn schema_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let bad_json = tmp.path().join("bad.json");
    fs::write(&bad_json, "{ not json").unwrap();
    assert_eq!(exec("sweep", &bad_json, &out, &[]), 2);
    assert_eq!(exec("sweep", &tmp.path().join("missing.json"), &out, &[]), 2);

    let mut cfg = small_sweep(json!({"family": "constant", "value": 1.0}), None);
    cfg["tolerances"] = json!({"energy": 5.0});
    let path = write_config(tmp.path(), "tol.json", &cfg);
    assert_eq!(exec("sweep", &path, &out, &[]), 2);
    assert_eq!(exec("validate", &path, &out, &[]), 2);

    let path = write_config(tmp.path(), "ok.json", &small_sweep(json!({"family": "constant", "value": 1.0}), None));
    assert_eq!(exec("classify", &path, &out, &[]), 2, "command mismatch");
    assert!(!out.exists());
}

#[test]
fn solver_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = shipped("solve_three_route.json");
    cfg["solve"]["nodes_per_axis"] = json!(64);
    cfg["solve"]["compare_route"] = Value::Null;
    // no grid node falls inside the region
    cfg["solve"]["region"] = json!({"shape": "interval", "lo": 0.01, "hi": 0.02});
    let path = write_config(tmp.path(), "s.json", &cfg);
    assert_eq!(exec("solve", &path, &tmp.path().join("out"), &[]), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("classify.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(exec("classify", &cfg, &a, &[]), 0);
    assert_eq!(exec("classify", &cfg, &b, &[]), 0);
    let names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.len() >= 4);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
    let lines = fs::read_to_string(a.join("classify.jsonl")).unwrap();
    let first: Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    for key in ["n", "rule", "limit_expression", "verdict"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

#[test]
fn seed_override_changes_the_config_hash_only_through_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = shipped("validate.json");
    cfg["validate"]["nodes_per_axis"] = json!(32);
    cfg["validate"]["random_vectors"] = json!(3);
    let path = write_config(tmp.path(), "v.json", &cfg);
    let run = |dir: &str, extra: &[&str]| {
        let out = tmp.path().join(dir);
        assert_eq!(exec("validate", &path, &out, extra), 0);
        fs::read_to_string(out.join("MANIFEST")).unwrap()
    };
    let base = run("a", &[]);
    let same = run("b", &["--seed", "20240601"]);
    let other = run("c", &["--seed", "7"]);
    assert_eq!(base, same);
    assert_ne!(base.lines().next(), other.lines().next());
}

#[test]
fn solve_exports_kernel_and_operator_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = shipped("solve_three_route.json");
    cfg["solve"]["route"] = json!("kernel");
    cfg["solve"]["compare_route"] = json!("spectral");
    cfg["solve"]["nodes_per_axis"] = json!(64);
    cfg["solve"]["half_width"] = json!(2.0);
    cfg["solve"]["route_tolerance"] = json!(0.1);
    cfg["solve"]["exports"] = json!({"eigenvalues": true, "kernel_matrix": true, "operator_triplets": true});
    let path = write_config(tmp.path(), "k.json", &cfg);
    let out = tmp.path().join("out");
    assert_eq!(exec("solve", &path, &out, &[]), 0);
    let bin = fs::read(out.join("kernel.bin")).unwrap();
    let (n, s, data) = frachom::export::read_kernel_binary(&bin).unwrap();
    assert_eq!((n, s, data.len()), (64, 0.5, 64 * 64));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    for key in ["route", "s", "N", "R", "norms", "u"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert_eq!(report["route"], "kernel");
    let eig = fs::read_to_string(out.join("eigenvalues.csv")).unwrap();
    assert_eq!(eig.lines().next(), Some("k,lambda"));
    assert_eq!(eig.lines().count(), 65);
    assert!(fs::read_to_string(out.join("operator.txt")).unwrap().lines().count() >= 3 * 64);
}

#[test]
fn extension_writes_summary_and_slices() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = shipped("extension.json");
    cfg["extension"]["nodes_per_axis"] = json!(64);
    cfg["extension"]["half_width"] = json!(2.0);
    cfg["extension"]["height"] = json!(4.0);
    cfg["extension"]["modes"] = json!([1, 2, 3]);
    cfg["extension"]["slices"] = json!([0.0, 1.0, 4.0]);
    let path = write_config(tmp.path(), "e.json", &cfg);
    let out = tmp.path().join("out");
    assert_eq!(exec("extension", &path, &out, &[]), 0);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("extension.json")).unwrap()).unwrap();
    for key in ["s", "Y", "M", "gamma", "energy", "dtn"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    assert_eq!(summary["dtn"].as_array().unwrap().len(), 64);
    for k in 0..3 {
        let slice = fs::read_to_string(out.join(format!("slice_{k:03}.csv"))).unwrap();
        assert_eq!(slice.lines().count(), 65);
    }
}

//! End-to-end tests of the `hamreg` binary: artifact layout, exit codes,
//! determinism, and error handling.

use std::path::Path;
use std::process::{Command, Output};

fn hamreg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamreg"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn generate_writes_the_expected_row_counts() {
    let tmp = tempfile::tempdir().unwrap();
    for (system, split, rows) in [("single", "s", 64), ("single", "f", 600), ("double", "s", 600)]
    {
        let out = format!("{system}_{split}.csv");
        let r = hamreg(
            &["generate", "--system", system, "--split", split, "--seed", "1", "--out", &out],
            tmp.path(),
        );
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let text = std::fs::read_to_string(tmp.path().join(&out)).unwrap();
        let data_rows = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("traj_id") && !l.is_empty())
            .count();
        assert_eq!(data_rows, rows);
    }
}

#[test]
fn generate_is_deterministic_in_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a.csv", "b.csv"] {
        let r = hamreg(
            &["generate", "--system", "double", "--split", "s", "--seed", "7", "--out", out],
            tmp.path(),
        );
        assert!(r.status.success());
    }
    let a = std::fs::read(tmp.path().join("a.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn train_smoke_run_writes_checkpoint_and_history() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.cfg",
        "system = single\nsplit = s\nfamily = hnn\nepochs = 100\n\
         lr_schedule = constant:0.003\nlambda_h = 0.07\nseed = 3\nout_dir = out\n",
    );
    let r = hamreg(&["train", "run.cfg"], tmp.path());
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(tmp.path().join("out/checkpoint.json").exists());
    let history = std::fs::read_to_string(tmp.path().join("out/history.csv")).unwrap();
    assert!(history.starts_with("epoch,loss,lr\n"));
    assert_eq!(history.lines().count(), 101);
}

#[test]
fn training_twice_with_the_same_seed_is_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.cfg",
        "system = single\nsplit = s\nfamily = hnn\nepochs = 120\n\
         lr_schedule = constant:0.003\nlambda_h = 0\nseed = 9\nout_dir = unused\n",
    );
    for out in ["out_a", "out_b"] {
        let r = hamreg(&["train", "run.cfg", "--out", out], tmp.path());
        assert!(r.status.success());
    }
    let a = std::fs::read(tmp.path().join("out_a/checkpoint.json")).unwrap();
    let b = std::fs::read(tmp.path().join("out_b/checkpoint.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_dataset_file_is_a_clean_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.cfg",
        "system = single\nsplit = s\nfamily = hnn\ndataset = nowhere.csv\nout_dir = out\n",
    );
    let r = hamreg(&["train", "run.cfg"], tmp.path());
    assert!(!r.status.success());
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("nowhere.csv"), "stderr: {err}");
}

#[test]
fn unknown_config_key_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.cfg",
        "system = single\nsplit = s\nfamily = hnn\nbatch_size = 32\n",
    );
    let r = hamreg(&["train", "run.cfg"], tmp.path());
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn bad_flag_values_exit_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let r = hamreg(
        &["generate", "--system", "triple", "--split", "s", "--out", "x.csv"],
        tmp.path(),
    );
    assert_eq!(r.status.code(), Some(3));
    let r = hamreg(
        &["reproduce", "--table", "9", "--scale", "desk", "--out", "x"],
        tmp.path(),
    );
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn evaluate_is_deterministic_and_writes_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.cfg",
        "system = single\nsplit = s\nfamily = hnn\nepochs = 400\n\
         lr_schedule = constant:0.01\nlambda_h = 0.07\nseed = 2\nout_dir = out\n",
    );
    assert!(hamreg(&["train", "run.cfg"], tmp.path()).status.success());
    for dir in ["eval_a", "eval_b"] {
        let r = hamreg(
            &["evaluate", "out/checkpoint.json", "--seed", "5", "--out", dir],
            tmp.path(),
        );
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let a = std::fs::read(tmp.path().join("eval_a/metrics.json")).unwrap();
    let b = std::fs::read(tmp.path().join("eval_b/metrics.json")).unwrap();
    assert_eq!(a, b);
    let metrics: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(metrics["scheme"], "HNN + H-Reg.");
    assert_eq!(metrics["dataset_split"], "s");
    assert_eq!(metrics["n_ics"], 10);
    assert_eq!(metrics["horizon_s"], 100.0);
    assert!(metrics["mean"].as_f64().unwrap() >= 0.0);
    let series = std::fs::read_to_string(tmp.path().join("eval_a/series.csv")).unwrap();
    assert!(series.starts_with("ic_id,t,abs_de_pct\n"));
    // 10 ICs x 1001 reported samples.
    assert_eq!(series.lines().count(), 1 + 10 * 1001);
}

#[test]
fn train_on_an_explicit_dataset_file_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let r = hamreg(
        &["generate", "--system", "single", "--split", "s", "--seed", "1", "--out", "ds.csv"],
        tmp.path(),
    );
    assert!(r.status.success());
    write(
        tmp.path(),
        "run.cfg",
        "system = single\nsplit = s\nfamily = baseline\ndataset = ds.csv\n\
         epochs = 50\nlr_schedule = constant:0.01\nseed = 1\nout_dir = out\n",
    );
    let r = hamreg(&["train", "run.cfg"], tmp.path());
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn crossval_reports_every_grid_point_and_a_winner() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "run.cfg",
        "system = single\nsplit = s\nfamily = hnn\nepochs = 200\n\
         lr_schedule = constant:0.01\nseed = 4\nout_dir = out\nlambda_grid = 0, 0.07\n",
    );
    let r = hamreg(&["crossval", "run.cfg"], tmp.path());
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/crossval.json")).unwrap())
            .unwrap();
    assert_eq!(json["scores"].as_array().unwrap().len(), 2);
    let best = json["best_lambda"].as_f64().unwrap();
    assert!(best == 0.0 || best == 0.07);
}

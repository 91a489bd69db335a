use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sfenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfenet"))
        .args(args)
        .env("SFENET_THREADS", "1")
        .output()
        .expect("spawn sfenet")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json summary")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line");
    serde_json::from_str(line).expect("json error line")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "seed = 2\n[synth]\ntrials = 8\nseconds = 2.0\nrate_hz = 16.0\n[split]\nscheme = \"indep\"\n\
         [arch]\ndense_units = 16\n[train]\nepochs = 1\n",
    )
    .unwrap();
    path
}

#[test]
fn missing_montage_reports_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "montage = \"/nonexistent/montage.cfg\"\n").unwrap();
    let out = sfenet(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["status"], "error");
    assert_eq!(err["kind"], "montage");
    assert!(err["message"].as_str().unwrap().contains("/nonexistent/montage.cfg"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let out = sfenet(&["run", "--fold", "sideways"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["status"], "error");

    let out = sfenet(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "usage");
}

#[test]
fn synth_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let data_dir = dir.path().join("data");

    let synth = stdout_json(&sfenet(&["synth", "--config", cfg, "--out", data_dir.to_str().unwrap()]));
    assert_eq!(synth["trials"], 8);
    let dataset = data_dir.join("synth.eegt");
    assert!(dataset.exists());

    let with_data = dir.path().join("with_data.toml");
    let text = std::fs::read_to_string(cfg).unwrap();
    std::fs::write(&with_data, format!("dataset = {:?}\n{text}", dataset.to_str().unwrap())).unwrap();
    let with_data = with_data.to_str().unwrap();

    let model_out = dir.path().join("model");
    let trained = stdout_json(&sfenet(&["train", "--config", with_data, "--out", model_out.to_str().unwrap()]));
    let model = trained["model"].as_str().unwrap().to_string();
    assert!(Path::new(&model).join("ensemble.toml").exists());
    assert_eq!(trained["holdout"]["members"].as_array().unwrap().len(), 5);

    let evaluated = stdout_json(&sfenet(&["eval", "--config", with_data, "--model", &model]));
    assert_eq!(evaluated["holdout"]["accuracy"], trained["holdout"]["accuracy"]);
}

#[test]
fn report_rerenders_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("metrics.csv");
    std::fs::write(&csv, "condition,mean,std,n\nNo_fold,80.00,1.50,5\nOurfold_vote,90.00,0.50,5\n").unwrap();
    let out_dir = dir.path().join("out");
    let summary = stdout_json(&sfenet(&[
        "report",
        "--input",
        csv.to_str().unwrap(),
        "--title",
        "Folds",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert_eq!(summary["rows"], 2);
    assert_eq!(std::fs::read(out_dir.join("metrics.csv")).unwrap(), std::fs::read(&csv).unwrap());
    assert!(std::fs::read_to_string(out_dir.join("metrics.svg")).unwrap().contains("Ourfold_vote"));

    std::fs::write(&csv, "condition,mean,std,n\n").unwrap();
    let out = sfenet(&["report", "--input", csv.to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["kind"], "empty_table");
}

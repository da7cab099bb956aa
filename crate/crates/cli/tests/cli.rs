use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_overfitguard"));
    c.env_remove("OVERFITGUARD_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn run_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_lines(o: &Output) -> Vec<serde_json::Value> {
    stdout(o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{l}: {e}")))
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synthetic(dir: &Path, n: usize, length: usize, seed: &str) -> PathBuf {
    let out = dir.join("corpus");
    let o = run(&[
        "--seed", seed, "simulate", "--mode", "synthetic", "--n", &n.to_string(), "--length", &length.to_string(),
        "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("manifest.json")
}

fn write_history(path: &Path, train: &[f64], val: &[f64]) {
    let mut text = String::from("epoch,train_loss,val_loss\n");
    for (i, (t, v)) in train.iter().zip(val).enumerate() {
        text += &format!("{i},{t},{v}\n");
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn monitor_hand_trace() {
    let input: String = [5, 4, 3, 4, 5]
        .iter()
        .enumerate()
        .map(|(e, v)| format!("{{\"epoch\":{e},\"value\":{v}}}\n"))
        .collect();
    let o = run_with_stdin(&["monitor", "--strategy", "es", "--patience", "2"], &input);
    assert_eq!(o.status.code(), Some(0));
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[4]["action"], "stop");
    assert_eq!(lines[4]["stopped_epoch"], 4);
    assert_eq!(lines[4]["best_epoch"], 2);
    assert_eq!(lines[4]["best_value"], 3.0);
}

#[test]
fn monitor_empty_and_malformed_streams() {
    let o = run_with_stdin(&["monitor"], "");
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());

    let o = run_with_stdin(&["monitor"], "{\"epoch\":0,\"value\":1}\n{oops\n");
    assert_eq!(o.status.code(), Some(2));
    let lines = json_lines(&o);
    assert_eq!(lines.len(), 2);
    assert!(lines[1]["error"].is_string());
}

#[test]
fn monitor_classifier_strategy_needs_model() {
    let o = run_with_stdin(&["monitor", "--strategy", "rolling"], "");
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn usage_and_missing_file_exit_codes() {
    assert_eq!(run(&["--no-such-flag"]).status.code(), Some(64));
    assert_eq!(run(&["detect"]).status.code(), Some(64));
    let o = run(&["train", "/definitely/missing.json", "--classifier", "knn-dtw", "--out", "/tmp/x.json"]);
    assert_eq!(o.status.code(), Some(66));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn synthetic_simulation_writes_files_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = synthetic(a.path(), 10, 60, "9");
    let mb = synthetic(b.path(), 10, 60, "9");
    let csvs = std::fs::read_dir(ma.parent().unwrap())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "csv")
        .count();
    assert_eq!(csvs, 10);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ma).unwrap()).unwrap();
    assert_eq!(manifest.as_array().unwrap().len(), 10);
    assert!(manifest[0]["label"].is_string());
    for i in 0..10 {
        let name = format!("synthetic-{i:04}.csv");
        let ra = std::fs::read(ma.parent().unwrap().join(&name)).unwrap();
        let rb = std::fs::read(mb.parent().unwrap().join(&name)).unwrap();
        assert_eq!(ra, rb);
    }
}

#[test]
fn seed_comes_from_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synthetic(a.path(), 4, 50, "21");
    let o = bin()
        .env("OVERFITGUARD_SEED", "21")
        .args(["simulate", "--mode", "synthetic", "--n", "4", "--length", "50", "--out", p(&b.path().join("corpus"))])
        .output()
        .unwrap();
    assert!(o.status.success());
    let read = |d: &Path| std::fs::read(d.join("corpus/synthetic-0001.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn mlp_simulation_on_toy_data_gives_twelve_histories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mlp");
    let o = run(&["simulate", "--mode", "mlp", "--epochs", "5", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_lines(&o)[0]["histories"], 12);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let entries = manifest.as_array().unwrap();
    assert_eq!(entries.len(), 12);
    assert_eq!(entries[0]["meta"]["architecture"], "2");
    assert_eq!(entries[11]["meta"]["architecture"], "16+8");
}

#[test]
fn singleton_grid_train_then_detect() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic(dir.path(), 24, 60, "4");
    let grid = dir.path().join("grid.json");
    std::fs::write(
        &grid,
        r#"[{"params":{"kind":"knn_dtw","k":1,"dtw":{"mode":"fast","radius":5,"cost":"absolute"}},"canonical_len":{"fixed":50}}]"#,
    )
    .unwrap();
    let model = dir.path().join("knn.json");
    let o = run(&["train", p(&manifest), "--classifier", "knn-dtw", "--grid", p(&grid), "--out", p(&model)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(model.exists());
    assert!(dir.path().join("knn.cv.json").exists());
    let rec = &json_lines(&o)[0];
    assert!(rec["cv_mean_f"].as_f64().unwrap() > 0.9);

    let rising = dir.path().join("rising.csv");
    let val: Vec<f64> = (0..60).map(|t| if t < 30 { 3.0 - t as f64 * 0.05 } else { 1.5 + (t - 30) as f64 * 0.05 }).collect();
    let train: Vec<f64> = (0..60).map(|t| 3.0 - t as f64 * 0.04).collect();
    write_history(&rising, &train, &val);
    let o = run(&["detect", p(&model), p(&rising)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_lines(&o)[0]["label"], "overfit");
}

#[test]
fn detect_with_spearman_model_and_unreadable_input() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic(dir.path(), 30, 60, "5");
    let model = dir.path().join("spearman.json");
    let o = run(&["train", p(&manifest), "--classifier", "spearman", "--out", p(&model)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let co = dir.path().join("co.csv");
    let v: Vec<f64> = (0..20).map(|t| 2.0 / (1.0 + t as f64)).collect();
    write_history(&co, &v, &v);
    let o = run(&["detect", p(&model), p(&co)]);
    assert_eq!(o.status.code(), Some(0));
    let rec = &json_lines(&o)[0];
    assert_eq!(rec["id"], "co");
    assert_eq!(rec["label"], "non_overfit");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "epoch,train_loss\n0,1\n").unwrap();
    let o = run(&["detect", p(&model), p(&co), p(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json_lines(&o).len(), 1);
}

#[test]
fn evaluate_patience_sweep_and_significance() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic(dir.path(), 12, 150, "6");
    let out = dir.path().join("report.json");
    let o = run(&["evaluate", "--prevention", p(&manifest), "--patience-sweep", "5:115:5", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let stats = report["prevention"]["stats"].as_array().unwrap();
    assert_eq!(stats.len(), 23);
    assert!(!report["prevention"]["significance"].as_array().unwrap().is_empty());
    let md = std::fs::read_to_string(out.with_extension("md")).unwrap();
    assert!(md.contains("early_stop(p=115)"));
    // stdout carries the same report as a single JSON record
    assert_eq!(json_lines(&o).len(), 1);
}

#[test]
fn evaluate_detection_of_perfect_detector() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic(dir.path(), 30, 60, "8");
    let model = dir.path().join("knn.json");
    assert!(run(&["train", p(&manifest), "--classifier", "knn-dtw", "--out", p(&model)]).status.success());
    let out = dir.path().join("det.json");
    let o = run(&["evaluate", "--detection", p(&manifest), "--model", p(&model), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = &json_lines(&o)[0];
    assert_eq!(report["detection"][0]["prf"]["macro_f"], 1.0);
}

#[test]
fn label_grid_search_reports_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic(dir.path(), 20, 60, "2");
    let labels = dir.path().join("labels.csv");
    let o = run(&["label", p(&manifest), "--grid-search", "--tail-direction", "increase", "--out", p(&labels)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = &json_lines(&o)[0];
    assert!(rec["search"]["model"]["thresholds"]["gap_p"].is_number());
    let text = std::fs::read_to_string(&labels).unwrap();
    assert_eq!(text.lines().count(), 21);

    let o = run(&["label", p(&manifest), "--inc-p", "1.5", "--out", p(&labels)]);
    assert_eq!(o.status.code(), Some(64));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn adaptsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptsel"))
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .expect("spawn adaptsel")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fit_icl(dir: &TempDir, measurements: &Path, pi0: &str) -> (Output, PathBuf) {
    let out = dir.path().join("fit.json");
    let o = adaptsel(&["fit-icl", "--measurements", p(measurements), "--pi0", pi0, "--out", p(&out)]);
    (o, out)
}

fn curve(fit: &Value) -> Vec<(u64, f64)> {
    fit["curve"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["shots"].as_u64().unwrap(), c["perf"].as_f64().unwrap()))
        .collect()
}

#[test]
fn icl_fit_matches_published_prediction_column() {
    let dir = TempDir::new().unwrap();
    let (o, out) = fit_icl(&dir, &fixture("hellaswag_icl.csv"), "free");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let published = [(1, 0.526), (2, 0.591), (4, 0.617), (8, 0.620), (16, 0.620)];
    let got = curve(&json(&out));
    assert_eq!(got.len(), published.len());
    for ((d, v), (pd, pv)) in got.iter().zip(published) {
        assert_eq!(*d, pd);
        assert!((v - pv).abs() <= 0.002, "{d} shots: {v} vs {pv}");
    }
}

#[test]
fn two_point_file_interpolates_exactly() {
    let dir = TempDir::new().unwrap();
    let (o, out) = fit_icl(&dir, &fixture("icl_two_point.csv"), "0.3153");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = json(&out);
    assert_eq!(fit["method"], "two_point");
    let c = curve(&fit);
    let at = |d: u64| c.iter().find(|x| x.0 == d).unwrap().1;
    assert!((at(1) - 0.526).abs() < 1e-9);
    assert!((at(8) - 0.620).abs() < 1e-9);
    assert!((at(2) - 0.591).abs() < 0.002);
}

#[test]
fn malformed_measurement_row_reports_line() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "strategy_id,kind,param:shots,seed,performance,cost_usd\n\
         icl,test_time,1,,0.5,0.1\n\
         icl,test_time,2,,zero point six,0.2\n",
    )
    .unwrap();
    let (o, _) = fit_icl(&dir, &bad, "free");
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn fit_preconditions_exit_3() {
    let dir = TempDir::new().unwrap();
    // Two points cannot support a free baseline.
    let (o, _) = fit_icl(&dir, &fixture("icl_two_point.csv"), "free");
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn seeds_are_averaged_unless_disabled() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("m.csv");
    fs::write(
        &m,
        "strategy_id,kind,param:shots,seed,performance,cost_usd\n\
         icl,test_time,1,0,0.50,0.1\nicl,test_time,1,1,0.52,0.1\n\
         icl,test_time,2,0,0.58,0.2\nicl,test_time,2,1,0.60,0.2\n\
         icl,test_time,8,0,0.61,0.9\nicl,test_time,8,1,0.63,0.9\n",
    )
    .unwrap();
    let (o, out) = fit_icl(&dir, &m, "free");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&out)["points"].as_array().unwrap().len(), 3);
    // Repeated shot counts are not distinct points for the curve fit.
    let o = adaptsel(&["fit-icl", "--measurements", p(&m), "--pi0", "free", "--no-aggregate"]);
    assert_eq!(code(&o), 3);
}

fn predict(dir: &TempDir, grid: &Path) -> (Output, PathBuf) {
    let (o, fit) = fit_icl(dir, &fixture("hellaswag_icl.csv"), "free");
    assert_eq!(code(&o), 0);
    let out = dir.path().join("estimates.json");
    let o = adaptsel(&[
        "predict",
        "--grid",
        p(grid),
        "--workload",
        p(&fixture("workload.json")),
        "--icl-fit",
        p(&fit),
        "--qlora-proxy",
        p(&fixture("qlora_proxy.json")),
        "--compute",
        p(&fixture("compute.json")),
        "--pricing",
        p(&fixture("pricing.json")),
        "--out",
        p(&out),
    ]);
    (o, out)
}

fn write_grid(dir: &TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("grid.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn predict_grid_sizes() {
    let dir = TempDir::new().unwrap();
    let (o, out) = predict(&dir, &fixture("grid.json"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = json(&out);
    assert_eq!(table["rows"].as_array().unwrap().len(), 55);
    assert_eq!(table["task"], "hellaswag");

    let qlora = write_grid(
        &dir,
        r#"{"strategies": [{"strategy": "qlora", "data_portion": {"start": 0.1, "stop": 1.0, "step": 0.1}, "iterations": {"start": 4, "stop": 8, "step": 1}}]}"#,
    );
    let (o, out) = predict(&dir, &qlora);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&out)["rows"].as_array().unwrap().len(), 50);

    let icl = write_grid(&dir, r#"{"strategies": [{"strategy": "icl", "shots": [1, 2, 4, 8, 16]}]}"#);
    let (o, out) = predict(&dir, &icl);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json(&out)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 5);
    // More shots cost more.
    let costs: Vec<f64> = rows.iter().map(|r| r["pred_cost"].as_f64().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[0] < w[1]), "{costs:?}");
}

#[test]
fn predict_empty_grid_is_empty_table() {
    let dir = TempDir::new().unwrap();
    let grid = write_grid(&dir, r#"{"strategies": []}"#);
    let (o, out) = predict(&dir, &grid);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(json(&out)["rows"].as_array().unwrap().is_empty());
}

#[test]
fn predict_unknown_strategy_exits_4() {
    let dir = TempDir::new().unwrap();
    let grid = write_grid(&dir, r#"{"strategies": [{"strategy": "prefix_tuning", "length": [8]}]}"#);
    let (o, _) = predict(&dir, &grid);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn predict_is_byte_identical_on_rerun() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let (_, out_a) = predict(&a, &fixture("grid.json"));
    let (_, out_b) = predict(&b, &fixture("grid.json"));
    assert_eq!(fs::read(out_a).unwrap(), fs::read(out_b).unwrap());
}

#[test]
fn predict_attaches_actuals() {
    let dir = TempDir::new().unwrap();
    let (o, fit) = fit_icl(&dir, &fixture("hellaswag_icl.csv"), "free");
    assert_eq!(code(&o), 0);
    let grid = write_grid(&dir, r#"{"strategies": [{"strategy": "icl", "shots": [1, 2, 4]}]}"#);
    let out = dir.path().join("est.json");
    let o = adaptsel(&[
        "predict",
        "--grid",
        p(&grid),
        "--workload",
        p(&fixture("workload.json")),
        "--icl-fit",
        p(&fit),
        "--actuals",
        p(&fixture("hellaswag_icl.csv")),
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = json(&out)["rows"].as_array().unwrap().clone();
    assert_eq!(rows[0]["act_perf"].as_f64(), Some(0.526));
    assert_eq!(rows[1]["act_cost"].as_f64(), Some(0.326));
    assert!(rows[2]["act_perf"].is_null());
}

#[test]
fn select_renders_table_schema_with_actuals() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json");
    let o = adaptsel(&[
        "select",
        "--estimates",
        p(&fixture("hellaswag_estimates.json")),
        "--ours-cost",
        "0.666,0.520,0.218",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    for col in ["Pred. Acc (%)", "Act. Acc (%)", "MAE (%)", "Act. Cost ($)", "Ours Cost ($)", "CRR (%)"] {
        assert!(text.contains(col), "missing {col}:\n{text}");
    }
    assert!(!text.contains('\u{1b}'));
    let report = json(&out);
    assert_eq!(report["bands"].as_array().unwrap().len(), 3);
    let crr = report["bands"][0]["crr"].as_f64().unwrap();
    let c_full = report["bands"][0]["c_full"].as_f64().unwrap();
    assert!((crr - (c_full - 0.666) / c_full * 100.0).abs() < 1e-9);
}

#[test]
fn select_single_band_is_global_argmax() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json");
    let est = fixture("hellaswag_estimates.json");
    let o = adaptsel(&["select", "--estimates", p(&est), "--bands", "1", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&out);
    let table = json(&est);
    let best = table["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["pred_perf"].as_f64().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(report["bands"].as_array().unwrap().len(), 1);
    assert_eq!(report["bands"][0]["pred_perf"].as_f64(), Some(best));
    assert_eq!(report["bands"][0]["candidates"].as_u64(), Some(55));
}

#[test]
fn select_empty_table_exits_3() {
    let dir = TempDir::new().unwrap();
    let est = dir.path().join("empty.json");
    fs::write(&est, r#"{"task": "t", "rows": []}"#).unwrap();
    let o = adaptsel(&["select", "--estimates", p(&est)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{rows").unwrap();
    assert_eq!(code(&adaptsel(&["select", "--estimates", p(&garbage)])), 2);
}

#[test]
fn select_is_byte_identical_on_rerun() {
    let dir = TempDir::new().unwrap();
    let est = fixture("hellaswag_estimates.json");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    adaptsel(&["select", "--estimates", p(&est), "--out", p(&a)]);
    adaptsel(&["select", "--estimates", p(&est), "--out", p(&b)]);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn pareto_gain_against_augmented_points() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("frontier.json");
    let plot = dir.path().join("plot.csv");
    let o = adaptsel(&[
        "pareto",
        "--points",
        p(&fixture("pareto_base.csv")),
        "--against",
        p(&fixture("pareto_augmented.csv")),
        "--out",
        p(&out),
        "--plot",
        p(&plot),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(&out);
    assert!(doc["gain"].as_f64().unwrap() > 0.0);
    // (1.2, 0.64) is dominated by (0.8, 0.66).
    let labels: Vec<&str> = doc["frontier"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["small", "medium", "large", "xl"]);
    let plot = fs::read_to_string(plot).unwrap();
    assert!(plot.starts_with("cost_lo,cost_hi,old_perf,new_perf,gain\n"));
    let integral: f64 = plot
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[1] - f[0]) * f[4]
        })
        .sum();
    assert!((integral - doc["gain"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn pareto_identical_files_have_zero_gain() {
    let base = fixture("pareto_base.csv");
    let o = adaptsel(&["pareto", "--points", p(&base), "--against", p(&base)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["gain"].as_f64(), Some(0.0));
}

#[test]
fn pareto_single_file_and_empty_input() {
    let o = adaptsel(&["pareto", "--points", p(&fixture("pareto_base.csv"))]);
    assert_eq!(code(&o), 0);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["frontier"].as_array().unwrap().len(), 4);
    assert!(doc.get("gain").is_none());

    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "cost,perf\n").unwrap();
    assert_eq!(code(&adaptsel(&["pareto", "--points", p(&empty)])), 3);
}

fn train(dir: &TempDir, emb: &Path, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.path().join("scores.json");
    let mut args = vec!["train-proxy", "--embeddings", p(emb), "--out", p(&out)];
    args.extend_from_slice(extra);
    let o = adaptsel(&args);
    (o, out)
}

#[test]
fn train_proxy_separates_toy_set() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("model.json");
    let (o, out) = train(&dir, &fixture("toy_separable.emb"), &["--self-check", "--out-model", p(&model)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("gradient check passed"));
    let scores = json(&out);
    assert_eq!(scores["proxy"][0]["train_accuracy"].as_f64(), Some(1.0));
    assert!(json(&model)["curve"].is_object());

    let (o, out) = train(&dir, &fixture("toy_options.emb"), &["--self-check", "--learning-rate", "0.05"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&out)["proxy"][0]["train_accuracy"].as_f64(), Some(1.0));
}

#[test]
fn train_proxy_rerun_is_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["--portions", "0.25,0.5,1.0", "--seed", "3"];
    let (_, out_a) = train(&a, &fixture("toy_options.emb"), &args);
    let (_, out_b) = train(&b, &fixture("toy_options.emb"), &args);
    assert_eq!(fs::read(out_a).unwrap(), fs::read(out_b).unwrap());
}

#[test]
fn train_proxy_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let (o, _) = train(&dir, &fixture("toy_separable.emb"), &["--iterations", "0"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let (o, _) = train(&dir, &fixture("toy_separable.emb"), &["--portions", "1.5"]);
    assert_eq!(code(&o), 3);

    let bad = dir.path().join("bad.emb");
    fs::write(&bad, "adaptsel-embeddings mode=ce dim=2 count=1\n0,1.0\n").unwrap();
    let (o, _) = train(&dir, &bad, &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn calibrate_pairs() {
    let o = adaptsel(&["calibrate", "--pairs", p(&fixture("calibration_pairs.csv"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["a"].as_f64().unwrap() > 0.0);
}

#[test]
fn summarize_published_cells() {
    let o = adaptsel(&["summarize", "--cells", p(&fixture("table1_cells.csv"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["cells"].as_u64(), Some(24));
}

fn copy_fixtures(dir: &TempDir, names: &[&str]) {
    for n in names {
        fs::copy(fixture(n), dir.path().join(n)).unwrap();
    }
}

#[test]
fn manifest_runs_pipeline() {
    let dir = TempDir::new().unwrap();
    copy_fixtures(
        &dir,
        &["manifest.json", "hellaswag_icl.csv", "grid.json", "workload.json", "compute.json", "qlora_proxy.json"],
    );
    let o = adaptsel(&["run", "--manifest", p(&dir.path().join("manifest.json"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in ["icl_fit.json", "estimates.json", "report.json", "pricing.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(json(&out.join("estimates.json"))["rows"].as_array().unwrap().len(), 55);
}

#[test]
fn manifest_validates_files_before_any_stage() {
    let dir = TempDir::new().unwrap();
    copy_fixtures(&dir, &["manifest.json", "grid.json", "workload.json", "compute.json", "qlora_proxy.json"]);
    // hellaswag_icl.csv is referenced but absent.
    let o = adaptsel(&["run", "--manifest", p(&dir.path().join("manifest.json"))]);
    assert_ne!(code(&o), 0);
    assert!(!dir.path().join("out").exists());

    copy_fixtures(&dir, &["hellaswag_icl.csv"]);
    fs::write(dir.path().join("grid.json"), r#"{"strategies": [{"strategy": "adapter"}]}"#).unwrap();
    let o = adaptsel(&["run", "--manifest", p(&dir.path().join("manifest.json"))]);
    assert_eq!(code(&o), 4);
    assert!(!dir.path().join("out").exists());
}

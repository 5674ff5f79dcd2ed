use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spkm::data::{gen_blobs, Dataset};
use spkm::linalg::matvec;
use spkm::KernelSpec;
use spkm_cli::bench::{radii_with_none, radius_label, summarize, Row, SCALING_SIZES};
use spkm_cli::args::Scenario;
use spkm_cli::commands::{ModelFile, Metrics, TheoryOutput};

fn spkm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spkm")).args(args).output().unwrap()
}

fn blobs_csv(dir: &Path, n: usize, seed: u64) -> String {
    let p = dir.join(format!("blobs{seed}.csv"));
    spkm::data::write_csv(&gen_blobs::<f64>(n, &[vec![3.0, 0.0], vec![-3.0, 0.0]], 0.3, seed).unwrap(), &p).unwrap();
    p.to_str().unwrap().to_string()
}

fn read<T: serde::de::DeserializeOwned>(p: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn train_writes_model_with_requested_basis_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path(), 60, 1);
    let out = dir.path().join("m");
    let o = spkm(&["train", "--data", &data, "--label-col", "2", "--loss", "cosine", "--r", "1", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let raw: serde_json::Value = read(&out.join("model.json"));
    assert_eq!(raw["U"].as_array().unwrap().len(), 1);
    assert_eq!(raw["config"]["train"]["seed"], 7);
    let report: serde_json::Value = read(&out.join("report.json"));
    assert!(report["fit"]["per_restart_objectives"].as_array().unwrap().len() == 5);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = spkm(&["train", "--data", missing.to_str().unwrap(), "--label-col", "2"]);
    assert_eq!(o.status.code(), Some(3));
    let data = blobs_csv(dir.path(), 30, 2);
    let out = dir.path().join("m");
    let o = spkm(&["train", "--data", &data, "--label-col", "2", "--r", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let o = spkm(&["bench", "--scenario", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    let o = spkm(&["train", "--data", &data, "--label-col", "2", "--c-norm", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_on_separable_training_blobs() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path(), 80, 3);
    let out = dir.path().join("m");
    assert!(spkm(&["train", "--data", &data, "--label-col", "2", "--r", "2", "--out", out.to_str().unwrap()]).status.success());
    let metrics_path = dir.path().join("metrics.json");
    let model = out.join("model.json");
    let o = spkm(&["eval", "--model", model.to_str().unwrap(), "--data", &data, "--label-col", "2", "--out", metrics_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Metrics = read(&metrics_path);
    assert_eq!(m.metric, "accuracy");
    assert!(m.value >= 0.95, "{m:?}");
    assert_eq!(m.r, 2);
    let file: ModelFile = read(&model);
    assert_eq!(m.c_nnz, file.model.coef().iter().filter(|v| **v != 0.0).count());
}

#[test]
fn eval_rejects_wrong_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let data = blobs_csv(dir.path(), 40, 4);
    let out = dir.path().join("m");
    assert!(spkm(&["train", "--data", &data, "--label-col", "2", "--r", "1", "--out", out.to_str().unwrap()]).status.success());
    let wide = dir.path().join("wide.csv");
    fs::write(&wide, "1,2,3,1\n4,5,6,-1\n").unwrap();
    let o = spkm(&["eval", "--model", out.join("model.json").to_str().unwrap(), "--data", wide.to_str().unwrap(), "--label-col", "3"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn eval_regression_on_planted_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = Array2::from_shape_fn((5, 2), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let u = Array2::from_shape_fn((2, 2), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let k = KernelSpec::rbf(1.0).unwrap();
    let y = matvec(k.gram(x.view(), u.view()).unwrap().view(), array![1.5, -0.8].view()).unwrap();
    let path = dir.path().join("planted.csv");
    spkm::data::write_csv(&Dataset::new(x, y).unwrap(), &path).unwrap();
    let p = path.to_str().unwrap();
    let out = dir.path().join("m");
    let o = spkm(&[
        "train", "--data", p, "--label-col", "label", "--loss", "squared", "--r", "2", "--sigma", "1", "--rescale", "false",
        "--standardize", "false", "--lambda", "1e-8", "--outer-max-iters", "200", "--obj-tol", "1e-12", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = spkm(&["eval", "--model", out.join("model.json").to_str().unwrap(), "--data", p, "--label-col", "label"]);
    let m: Metrics = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m.metric, "mse");
    assert!(m.value < 1e-3, "{m:?}");
}

#[test]
fn multiclass_labels_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = gen_blobs::<f64>(90, &[vec![4.0, 0.0], vec![-4.0, 0.0], vec![0.0, 4.0]], 0.3, 5).unwrap();
    let y = ds.y.mapv(|c| 10.0 + c);
    let path = dir.path().join("three.csv");
    spkm::data::write_csv(&Dataset::new(ds.x.clone(), y).unwrap(), &path).unwrap();
    let out = dir.path().join("m");
    let p = path.to_str().unwrap();
    assert!(spkm(&["train", "--data", p, "--label-col", "2", "--r", "3", "--out", out.to_str().unwrap()]).status.success());
    let file: ModelFile = read(&out.join("model.json"));
    assert_eq!(file.classes, Some(vec![10.0, 11.0, 12.0]));
    let o = spkm(&["eval", "--model", out.join("model.json").to_str().unwrap(), "--data", p, "--label-col", "2"]);
    let m: Metrics = serde_json::from_slice(&o.stdout).unwrap();
    assert!(m.value >= 0.9, "{m:?}");
}

#[test]
fn theory_command_values() {
    let o = spkm(&["theory", "--lambda-bound", "0", "--trials", "3"]);
    let t: TheoryOutput = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(t.estimate, 0.0);
    let o = spkm(&["theory", "--lambda-bound", "2", "--n", "100", "--trials", "5"]);
    let t: TheoryOutput = serde_json::from_slice(&o.stdout).unwrap();
    assert!((t.bound - 0.2).abs() < 1e-15);
    assert!(t.estimate <= t.bound + 3.0 * t.stderr, "{t:?}");
}

#[test]
fn synth_outputs_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let blobs = dir.path().join("b.csv");
    assert!(spkm(&["synth", "--generator", "blobs", "--n", "50", "--out", blobs.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(&blobs).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert!(text.lines().next().unwrap().ends_with("label"));
    let sn = |name: &str| {
        let p = dir.path().join(name);
        let o = spkm(&["synth", "--generator", "sparse-noise", "--n", "40", "--d-signal", "2", "--d-noise", "18", "--seed", "4", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
        (fs::read(&p).unwrap(), fs::read(p.with_extension("mask.json")).unwrap())
    };
    let (csv_a, mask_a) = sn("a.csv");
    let (csv_b, mask_b) = sn("b2.csv");
    assert_eq!(csv_a, csv_b);
    assert_eq!(mask_a, mask_b);
    let header = String::from_utf8(csv_a).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header.split(',').count(), 21);
    let mask: serde_json::Value = serde_json::from_slice(&mask_a).unwrap();
    assert_eq!(mask["signal_mask"].as_array().unwrap().iter().filter(|v| v.as_bool().unwrap()).count(), 2);
    let o = spkm(&["synth", "--generator", "sparse-noise", "--degree", "3", "--out", dir.path().join("c.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_writes_csv_and_matching_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = spkm(&["bench", "--scenario", "mkl", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("bench_mkl.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["scenario", "method", "dataset", "param", "value_name", "value", "seed", "seconds"]
    );
    let rows: Vec<Row> = rdr.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows.iter().filter(|r| r.value_name == "accuracy").map(|r| r.seed).collect::<Vec<_>>(), vec![3, 4, 5, 6, 7]);
    let summary: serde_json::Value = read(&dir.path().join("bench_mkl_summary.json"));
    for e in summary["entries"].as_array().unwrap() {
        let v: Vec<f64> = rows.iter().filter(|r| r.value_name == e["value_name"]).map(|r| r.value).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((e["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    }
}

#[test]
fn scenario_grids() {
    let radii = radii_with_none();
    assert!(radii.len() >= 8);
    let labels: std::collections::BTreeSet<String> = radii.iter().map(|r| radius_label(*r)).collect();
    assert_eq!(labels.len(), radii.len());
    assert_eq!(SCALING_SIZES, [500, 1000, 2000, 4000]);
}

#[test]
fn summary_statistics() {
    let row = |seed, value| Row {
        scenario: "x".into(),
        method: "m".into(),
        dataset: "d".into(),
        param: "p".into(),
        value_name: "v".into(),
        value,
        seed,
        seconds: 0.0,
    };
    let s = summarize(Scenario::Mkl, 0, &[row(0, 1.0), row(1, 2.0), row(2, 3.0)]);
    assert_eq!(s.entries.len(), 1);
    assert_eq!(s.entries[0].mean, 2.0);
    assert_eq!(s.entries[0].std, 1.0);
    assert_eq!(s.seeds, vec![0, 1, 2, 3, 4]);
}

//! Benchmark scenarios. Each returns one row per (method, dataset, param,
//! value, seed); `summarize` aggregates rows over seeds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};
use spkm::baselines::krr_fit;
use spkm::data::{
    accuracy, gen_blobs, gen_multiview, gen_regression, gen_sparse_noise, lambda_grid, radius_grid, sigma_heuristic, Dataset,
};
use spkm::spkm::{fit, fit_mkl, Objective, Penalty, View};
use spkm::{CNorm, KernelSpec, LossSpec, SpkmModel, Task, TrainConfig};

use crate::args::Scenario;
use crate::commands::load_dataset;
use crate::error::{io_err, CliError, CliResult};
use crate::protocol::{classification_defaults, nystrom_accuracy, prepare, select_krr, select_spkm, LandmarkSource, SpkmSearch};

pub const REPEATS: u64 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario: String,
    pub method: String,
    pub dataset: String,
    pub param: String,
    pub value_name: String,
    pub value: f64,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub method: String,
    pub dataset: String,
    pub param: String,
    pub value_name: String,
    pub mean: f64,
    /// Sample standard deviation (0 for a single row).
    pub std: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub entries: Vec<SummaryEntry>,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub seed: u64,
    pub bcw: PathBuf,
}

#[allow(clippy::too_many_arguments)]
fn row(scenario: Scenario, method: &str, dataset: &str, param: String, value_name: &str, value: f64, seed: u64, seconds: f64) -> Row {
    Row {
        scenario: scenario.name().into(),
        method: method.into(),
        dataset: dataset.into(),
        param,
        value_name: value_name.into(),
        value,
        seed,
        seconds,
    }
}

pub fn seeds(first: u64) -> Vec<u64> {
    (first..first + REPEATS).collect()
}

pub fn load_bcw(path: &Path) -> CliResult<Dataset<f64>> {
    load_dataset(path, &spkm::data::LabelColumn::Name("diagnosis".into()))
}

/// Two overlapping Gaussian blobs in the plane.
pub fn nystrom_blobs(seed: u64) -> CliResult<Dataset<f64>> {
    Ok(gen_blobs(300, &[vec![1.0, 0.0], vec![-1.0, 0.0]], 1.0, seed)?)
}

pub fn run(scenario: Scenario, opts: &BenchOptions) -> CliResult<Vec<Row>> {
    let mut rows = match scenario {
        Scenario::Table1 => table1(opts)?,
        Scenario::Nystrom => nystrom(opts)?,
        Scenario::Scaling => scaling(opts)?,
        Scenario::Sparsity => sparsity(opts)?,
        Scenario::Mkl => mkl(opts)?,
    };
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| {
        (&a.method, &a.dataset, &a.param, &a.value_name, a.seed).cmp(&(&b.method, &b.dataset, &b.param, &b.value_name, b.seed))
    });
}

fn full_search(seed: u64, r: usize) -> SpkmSearch {
    SpkmSearch { base: classification_defaults(r, seed), rescale: true, lambdas: lambda_grid(), radii: radii_with_none() }
}

fn table1(opts: &BenchOptions) -> CliResult<Vec<Row>> {
    let sc = Scenario::Table1;
    let ds = load_bcw(&opts.bcw)?;
    let mut rows = Vec::new();
    for seed in seeds(opts.seed) {
        let split = prepare(&ds, seed, true)?;
        let t = Instant::now();
        let sel = select_spkm(&split, &full_search(seed, 5))?;
        let secs = t.elapsed().as_secs_f64();
        rows.push(row(sc, "spkm", "bcw", "R=5".into(), "accuracy", sel.test_score, seed, secs));
        rows.push(row(sc, "spkm", "bcw", "R=5".into(), "basis_vectors", sel.model.r() as f64, seed, secs));
        let t = Instant::now();
        let krr = select_krr(&split, Task::Binary, &lambda_grid())?;
        let secs = t.elapsed().as_secs_f64();
        rows.push(row(sc, "krr", "bcw", "rbf".into(), "accuracy", krr.test_score, seed, secs));
        rows.push(row(sc, "krr", "bcw", "rbf".into(), "basis_vectors", split.train.n() as f64, seed, secs));
    }
    Ok(rows)
}

fn nystrom(opts: &BenchOptions) -> CliResult<Vec<Row>> {
    let sc = Scenario::Nystrom;
    let bcw = load_bcw(&opts.bcw)?;
    let mut rows = Vec::new();
    for seed in seeds(opts.seed) {
        for (name, ds) in [("blobs", nystrom_blobs(seed)?), ("bcw", bcw.clone())] {
            let split = prepare(&ds, seed, true)?;
            for m in [2usize, 5] {
                for (method, source) in [("nystrom-spkm", LandmarkSource::Spkm), ("nystrom-kmeans", LandmarkSource::Kmeans)] {
                    let t = Instant::now();
                    let base = classification_defaults(m, seed);
                    let (_, _, test) = nystrom_accuracy(&split, m, source, seed, &lambda_grid(), &base)?;
                    rows.push(row(sc, method, name, format!("m={m}"), "accuracy", test, seed, t.elapsed().as_secs_f64()));
                }
            }
        }
    }
    Ok(rows)
}

pub const SCALING_SIZES: [usize; 4] = [500, 1000, 2000, 4000];
const SCALING_D: usize = 20;
const SCALING_R: usize = 5;
const GRADIENT_REPEATS: usize = 5;

/// Regression SPKM run with a bounded amount of work: one restart and at
/// most five outer and five inner iterations.
pub fn scaling_config(seed: u64) -> TrainConfig<f64> {
    TrainConfig {
        task: Task::Regression,
        r: SCALING_R,
        loss: LossSpec::Squared,
        c_norm: CNorm::L2,
        lambda: 1e-3,
        restarts: 1,
        u_max_iters: 5,
        outer_max_iters: 5,
        obj_tol: f64::MIN_POSITIVE,
        seed,
        ..TrainConfig::default()
    }
}

/// Fastest of several evaluations of the full objective gradient at a
/// data-anchored model.
pub fn time_gradient(x: &Array2<f64>, y: &ndarray::Array1<f64>, kernel: KernelSpec<f64>) -> CliResult<f64> {
    let basis = x.slice(s![..SCALING_R, ..]).to_owned();
    let c = ndarray::Array1::from_elem(SCALING_R, 0.5);
    let model = SpkmModel::single(Task::Regression, LossSpec::Squared, kernel, basis, c)?;
    let targets = y.view().insert_axis(Axis(1));
    let obj = Objective::new(&[x.view()], targets, LossSpec::Squared, Penalty { lambda: 1e-3, norm: CNorm::L2 })?;
    let mut best = f64::INFINITY;
    for _ in 0..GRADIENT_REPEATS {
        let t = Instant::now();
        let g = obj.gradient(&model)?;
        std::hint::black_box(&g);
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

fn scaling(opts: &BenchOptions) -> CliResult<Vec<Row>> {
    let sc = Scenario::Scaling;
    let mut rows = Vec::new();
    for seed in seeds(opts.seed) {
        for n in SCALING_SIZES {
            let ds = gen_regression::<f64>(n, SCALING_D, 0.1, seed)?;
            let sigma = sigma_heuristic(ds.x.view())?;
            let kernel = KernelSpec::rbf(sigma)?;
            let p = format!("n={n}");
            let g = time_gradient(&ds.x, &ds.y, kernel)?;
            rows.push(row(sc, "spkm-gradient", "regression", p.clone(), "seconds", g, seed, g));
            let t = Instant::now();
            fit(ds.x.view(), ds.y.view(), kernel, &scaling_config(seed))?;
            let f = t.elapsed().as_secs_f64();
            rows.push(row(sc, "spkm", "regression", p.clone(), "seconds", f, seed, f));
            let t = Instant::now();
            krr_fit(ds.x.view(), ds.y.view(), kernel, 1e-3)?;
            let k = t.elapsed().as_secs_f64();
            rows.push(row(sc, "krr", "regression", p, "seconds", k, seed, k));
        }
    }
    Ok(rows)
}

pub const SPARSITY_N: usize = 600;

/// Column indices where any basis vector is nonzero.
pub fn selected_features(u: &Array2<f64>) -> Vec<usize> {
    (0..u.ncols()).filter(|&j| u.column(j).iter().any(|v| *v != 0.0)).collect()
}

pub fn radius_label(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("radius={v}"),
        None => "radius=none".into(),
    }
}

/// The radius grid followed by the unprojected run.
pub fn radii_with_none() -> Vec<Option<f64>> {
    let mut radii: Vec<Option<f64>> = radius_grid().into_iter().map(Some).collect();
    radii.push(None);
    radii
}

fn sparsity(opts: &BenchOptions) -> CliResult<Vec<Row>> {
    let sc = Scenario::Sparsity;
    let radii = radii_with_none();
    let mut rows = Vec::new();
    for seed in seeds(opts.seed) {
        let data = gen_sparse_noise::<f64>(SPARSITY_N, 3, 27, 2, seed)?;
        let split = prepare(&data.dataset, seed, true)?;
        let signal: Vec<usize> = (0..data.signal_mask.len()).filter(|&j| data.signal_mask[j]).collect();
        for &radius in &radii {
            let t = Instant::now();
            let search = SpkmSearch { base: classification_defaults(2, seed), rescale: true, lambdas: lambda_grid(), radii: vec![radius] };
            let sel = select_spkm(&split, &search)?;
            let secs = t.elapsed().as_secs_f64();
            let chosen = selected_features(sel.model.basis());
            let hits = signal.iter().filter(|j| chosen.contains(j)).count();
            let p = radius_label(radius);
            rows.push(row(sc, "spkm", "sparse-noise", p.clone(), "accuracy", sel.test_score, seed, secs));
            rows.push(row(sc, "spkm", "sparse-noise", p.clone(), "recall", hits as f64 / signal.len() as f64, seed, secs));
            rows.push(row(sc, "spkm", "sparse-noise", p, "selected_features", chosen.len() as f64, seed, secs));
        }
    }
    Ok(rows)
}

pub const MKL_LAMBDA: f64 = 20.0;

/// Two-view SPKM with l1 weights; returns (test accuracy, nonzero noise-view
/// weights).
pub fn mkl_run(seed: u64) -> CliResult<(f64, usize)> {
    let ds = gen_multiview::<f64>(270, 2, 4, 1.5, seed)?;
    let split = prepare(&ds, seed, true)?;
    let views = ds.views.clone().expect("multiview data has views");
    let view_of = |d: &Dataset<f64>, j: usize| d.x.slice(s![.., views[j].clone()]).to_owned();
    let (tr0, tr1) = (view_of(&split.train, 0), view_of(&split.train, 1));
    let k0 = KernelSpec::rbf(sigma_heuristic(tr0.view())?)?;
    let k1 = KernelSpec::rbf(sigma_heuristic(tr1.view())?)?;
    let cfg = TrainConfig {
        task: Task::Binary,
        loss: LossSpec::Squared,
        c_norm: CNorm::L1,
        lambda: MKL_LAMBDA,
        seed,
        ..TrainConfig::default()
    };
    let (model, _) = fit_mkl(&[View { x: tr0.view(), kernel: k0, r: 2 }, View { x: tr1.view(), kernel: k1, r: 2 }], split.train.y.view(), &cfg)?;
    let (te0, te1) = (view_of(&split.test, 0), view_of(&split.test, 1));
    let scores = model.predict_views(&[te0.view(), te1.view()])?;
    let acc = accuracy(split.test.y.view(), model.decide(scores.view()).view())?;
    let noise = model.coef().slice(s![model.block_coef_range(1), ..]).iter().filter(|v| **v != 0.0).count();
    Ok((acc, noise))
}

fn mkl(opts: &BenchOptions) -> CliResult<Vec<Row>> {
    let sc = Scenario::Mkl;
    let mut rows = Vec::new();
    for seed in seeds(opts.seed) {
        let t = Instant::now();
        let (acc, noise) = mkl_run(seed)?;
        let secs = t.elapsed().as_secs_f64();
        rows.push(row(sc, "spkm-mkl", "multiview", "R=2+2".into(), "accuracy", acc, seed, secs));
        rows.push(row(sc, "spkm-mkl", "multiview", "R=2+2".into(), "noise_view_nnz", noise as f64, seed, secs));
    }
    Ok(rows)
}

pub fn summarize(scenario: Scenario, first_seed: u64, rows: &[Row]) -> Summary {
    let mut groups: BTreeMap<(String, String, String, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method.clone(), r.dataset.clone(), r.param.clone(), r.value_name.clone())).or_default().push(r.value);
    }
    let entries = groups
        .into_iter()
        .map(|((method, dataset, param, value_name), v)| {
            let count = v.len();
            let mean = v.iter().sum::<f64>() / count as f64;
            let std = if count > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt() } else { 0.0 };
            SummaryEntry { method, dataset, param, value_name, mean, std, count }
        })
        .collect();
    Summary { scenario: scenario.name().into(), seeds: seeds(first_seed), entries }
}

/// Writes `bench_<scenario>.csv` and `bench_<scenario>_summary.json`.
pub fn write_outputs(dir: &Path, scenario: Scenario, first_seed: u64, rows: &[Row]) -> CliResult<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv_path = dir.join(format!("bench_{}.csv", scenario.name()));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CliError::Data(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| io_err(&csv_path, e))?;
    let json_path = dir.join(format!("bench_{}_summary.json", scenario.name()));
    crate::commands::write_json(&summarize(scenario, first_seed, rows), &json_path)?;
    Ok((csv_path, json_path))
}

/// Mean of the rows matching `method`, `dataset`, `param` and `value_name`.
pub fn mean_of(rows: &[Row], method: &str, dataset: &str, param: &str, value_name: &str) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.dataset == dataset && r.param == param && r.value_name == value_name)
        .map(|r| r.value)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

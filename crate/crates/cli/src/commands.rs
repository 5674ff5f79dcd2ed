use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use spkm::data::{
    accuracy, gen_blobs, gen_multiview, gen_regression, gen_sparse_noise, load_csv, mse, sigma_heuristic, sniff_header, write_csv,
    Dataset, Standardizer,
};
use spkm::spkm::{fit, fit_multiclass, one_hot_pm1};
use spkm::theory::{empirical_rademacher, rademacher_bound, BoundInputs};
use spkm::{CNorm, KernelSpec, LossSpec, SpkmModel, Task, TrainConfig};

use crate::args::{EvalArgs, Generator, KernelArg, LossArg, SigmaArg, SynthArgs, TaskArg, TheoryArgs, TrainArgs};
use crate::error::{io_err, CliError, CliResult};

/// Everything needed to reproduce a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub data: String,
    pub label_col: String,
    pub standardize: bool,
    pub sigma: Option<f64>,
    pub sigma_auto: bool,
    pub kernel: KernelSpec<f64>,
    pub train: TrainConfig<f64>,
}

/// model.json: the model fields at top level plus what is needed to apply
/// it to raw data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub model: SpkmModel<f64>,
    /// Original label values of the classes (multiclass only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<Standardizer<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_names: Option<Vec<String>>,
    pub config: ResolvedConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: ResolvedConfig,
    pub fit: spkm::FitReport,
    pub train_metric: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub metric: String,
    pub value: f64,
    pub r: usize,
    pub u_nnz_fraction: f64,
    pub c_nnz: usize,
    pub seconds: f64,
}

pub fn load_dataset(path: &Path, label: &spkm::data::LabelColumn) -> CliResult<Dataset<f64>> {
    if !path.is_file() {
        return Err(CliError::Data(format!("{}: no such file", path.display())));
    }
    let header = sniff_header(path)?;
    Ok(load_csv(path, label, header)?)
}

fn label_string(l: &spkm::data::LabelColumn) -> String {
    match l {
        spkm::data::LabelColumn::Index(i) => i.to_string(),
        spkm::data::LabelColumn::Name(s) => s.clone(),
    }
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<D> {
    let s = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&s).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn resolve_task(args: &TrainArgs, ds: &Dataset<f64>) -> Task {
    match args.task {
        Some(TaskArg::Binary) => Task::Binary,
        Some(TaskArg::Multiclass) => Task::Multiclass,
        Some(TaskArg::Regression) => Task::Regression,
        None => match args.loss {
            LossArg::Squared => Task::Regression,
            LossArg::Cosine if ds.label_values().len() > 2 => Task::Multiclass,
            LossArg::Cosine => Task::Binary,
        },
    }
}

fn class_indices(y: &Array1<f64>, classes: &[f64]) -> CliResult<Vec<usize>> {
    y.iter()
        .map(|v| classes.iter().position(|c| c == v).ok_or_else(|| CliError::Data(format!("label {v} not seen in training"))))
        .collect()
}

/// Builds the resolved configuration and fits; shared by `train` and tests.
pub fn train(args: &TrainArgs) -> CliResult<(ModelFile, TrainReport)> {
    let start = Instant::now();
    let c_norm = CNorm::try_from(args.c_norm).map_err(|e| CliError::Config(e.to_string()))?;
    let loss = match args.loss {
        LossArg::Squared => LossSpec::Squared,
        LossArg::Cosine => LossSpec::Cosine,
    };
    let ds = load_dataset(&args.data.data, &args.data.label_col)?;
    let task = resolve_task(args, &ds);
    let cfg = TrainConfig {
        task,
        r: args.r,
        loss,
        c_norm,
        lambda: args.lambda,
        u_ball_radius: args.u_radius.0,
        restarts: args.restarts,
        u_max_iters: args.u_max_iters,
        outer_max_iters: args.outer_max_iters,
        obj_tol: args.obj_tol,
        seed: args.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let (x, scaler) = if args.standardize {
        let st = Standardizer::fit(ds.x.view())?;
        (st.transform(ds.x.view())?, Some(st))
    } else {
        (ds.x.clone(), None)
    };
    let kernel = match args.kernel {
        KernelArg::Rbf => {
            let sigma = match args.sigma {
                SigmaArg::Auto => sigma_heuristic(x.view())?,
                SigmaArg::Value(s) => s,
            };
            KernelSpec::rbf(sigma)?.with_rescale(args.rescale)?
        }
        KernelArg::Poly => KernelSpec::polynomial(args.degree, args.offset)?,
    };
    let (model, report, classes) = if task == Task::Multiclass {
        let classes = ds.label_values();
        let idx = class_indices(&ds.y, &classes)?;
        let y = one_hot_pm1::<f64>(&idx, classes.len())?;
        let (m, r) = fit_multiclass(x.view(), y.view(), kernel, &cfg)?;
        (m, r, Some(classes))
    } else {
        let (m, r) = fit(x.view(), ds.y.view(), kernel, &cfg)?;
        (m, r, None)
    };
    let config = ResolvedConfig {
        data: args.data.data.display().to_string(),
        label_col: label_string(&args.data.label_col),
        standardize: args.standardize,
        sigma: (kernel.family() == spkm::KernelFamily::Rbf).then(|| kernel.sigma()),
        sigma_auto: args.kernel == KernelArg::Rbf && args.sigma == SigmaArg::Auto,
        kernel,
        train: cfg,
    };
    let file = ModelFile { model, classes, scaler, feature_names: ds.feature_names.clone(), config: config.clone() };
    let mut train_metric = score_model(&file, &ds)?;
    train_metric.seconds = start.elapsed().as_secs_f64();
    Ok((file, TrainReport { config, fit: report, train_metric }))
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<PathBuf> {
    let (file, report) = train(args)?;
    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let model_path = args.out.join("model.json");
    write_json(&file, &model_path)?;
    write_json(&report, &args.out.join("report.json"))?;
    log::info!("wrote {}", model_path.display());
    Ok(model_path)
}

/// Scores a saved model on raw (unstandardized) data.
pub fn score_model(file: &ModelFile, ds: &Dataset<f64>) -> CliResult<Metrics> {
    let start = Instant::now();
    let model = &file.model;
    let x: Array2<f64> = match &file.scaler {
        Some(st) => st.transform(ds.x.view())?,
        None => ds.x.clone(),
    };
    let scores = model.predict(x.view())?;
    let pred = model.decide(scores.view());
    let (metric, value) = match model.task() {
        Task::Regression => ("mse", mse(ds.y.view(), pred.view())?),
        Task::Binary => ("accuracy", accuracy(ds.y.view(), pred.view())?),
        Task::Multiclass => {
            let classes = file.classes.as_deref().ok_or_else(|| CliError::Data("multiclass model without classes".into()))?;
            let labels: Array1<f64> = pred.iter().map(|&k| classes[k as usize]).collect();
            ("accuracy", accuracy(ds.y.view(), labels.view())?)
        }
    };
    Ok(Metrics {
        metric: metric.into(),
        value,
        r: model.r(),
        u_nnz_fraction: model.u_nnz_fraction(),
        c_nnz: model.c_nnz(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<Metrics> {
    let file: ModelFile = read_json(&args.model)?;
    let ds = load_dataset(&args.data.data, &args.data.label_col)?;
    let metrics = score_model(&file, &ds)?;
    match &args.out {
        Some(p) => write_json(&metrics, p)?,
        None => println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize")),
    }
    Ok(metrics)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryOutput {
    pub bound: f64,
    pub estimate: f64,
    pub trials: usize,
    pub stderr: f64,
    pub tau: f64,
    pub lambda_bound: f64,
    pub n: usize,
    pub sigma: f64,
    pub r: usize,
    pub seed: u64,
}

pub fn cmd_theory(args: &TheoryArgs) -> CliResult<TheoryOutput> {
    let x = match &args.data {
        Some(p) => {
            let label = args.label_col.clone().ok_or_else(|| CliError::Config("--label-col is required with --data".into()))?;
            load_dataset(p, &label)?.x
        }
        None => standard_normal(args.n, args.d, args.seed)?,
    };
    let kernel = KernelSpec::rbf(args.sigma)?;
    let tau = kernel.diagonal_bound().expect("rbf diagonal is bounded");
    let n = x.nrows();
    let bound = if args.lambda_bound == 0.0 { 0.0 } else { rademacher_bound(&BoundInputs::new(tau, args.lambda_bound, n)?)? };
    let est = empirical_rademacher(x.view(), &kernel, args.lambda_bound, args.r, args.trials, args.seed)?;
    let out = TheoryOutput {
        bound,
        estimate: est.mean,
        trials: args.trials,
        stderr: est.stderr,
        tau,
        lambda_bound: args.lambda_bound,
        n,
        sigma: args.sigma,
        r: args.r,
        seed: args.seed,
    };
    match &args.out {
        Some(p) => write_json(&out, p)?,
        None => println!("{}", serde_json::to_string_pretty(&out).expect("theory output serializes")),
    }
    Ok(out)
}

/// Seeded i.i.d. standard-normal sample.
pub fn standard_normal(n: usize, d: usize, seed: u64) -> CliResult<Array2<f64>> {
    if n == 0 || d == 0 {
        return Err(CliError::Config("n and d must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Array2::from_shape_fn((n, d), |_| rng.sample(StandardNormal)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaskSidecar {
    pub generator: String,
    pub seed: u64,
    pub signal_mask: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub views: Option<Vec<[usize; 2]>>,
}

/// Path of the mask file written next to a synthetic CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("mask.json")
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let s = args.separation;
    let (ds, mask, name) = match args.generator {
        Generator::Blobs => (gen_blobs(args.n, &[vec![s, 0.0], vec![-s, 0.0]], args.std, args.seed)?, None, "blobs"),
        Generator::SparseNoise => {
            let d = gen_sparse_noise(args.n, args.d_signal, args.d_noise, args.degree, args.seed)?;
            (d.dataset, Some(d.signal_mask), "sparse-noise")
        }
        Generator::Multiview => (gen_multiview(args.n, args.d_signal, args.d_noise, s, args.seed)?, None, "multiview"),
        Generator::Regression => (gen_regression(args.n, args.d, args.std, args.seed)?, None, "regression"),
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    write_csv(&ds, &args.out)?;
    if mask.is_some() || ds.views.is_some() {
        let side = MaskSidecar {
            generator: name.into(),
            seed: args.seed,
            signal_mask: mask.unwrap_or_else(|| vec![true; ds.d()]),
            views: ds.views.as_ref().map(|v| v.iter().map(|r| [r.start, r.end]).collect()),
        };
        write_json(&side, &sidecar_path(&args.out))?;
    }
    Ok(())
}

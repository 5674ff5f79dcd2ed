//! The evaluation protocol shared by `train`, `bench` and the acceptance
//! suite: thirds split, train-only standardization, mean-distance bandwidth,
//! grid search on the validation third and scoring on the test third.

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};
use spkm::baselines::{kmeans, krr_fit, sign_labels, NystromMap, NystromRidge};
use spkm::data::{accuracy, grid_search, mse, sigma_heuristic, split_thirds, standardize, Dataset, Direction, Standardizer};
use spkm::spkm::fit;
use spkm::{CNorm, KernelSpec, LossSpec, Result, SpkmModel, Task, TrainConfig};

/// Train / validation / test thirds after standardization with training
/// statistics.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: Dataset<f64>,
    pub val: Dataset<f64>,
    pub test: Dataset<f64>,
    pub scaler: Option<Standardizer<f64>>,
}

pub fn prepare(ds: &Dataset<f64>, seed: u64, standardize_features: bool) -> Result<Split> {
    let (train, val, test) = split_thirds(ds, seed)?;
    if !standardize_features {
        return Ok(Split { train, val, test, scaler: None });
    }
    let (train, mut rest, st) = standardize(&train, &[&val, &test])?;
    let test = rest.pop().expect("two others");
    let val = rest.pop().expect("two others");
    Ok(Split { train, val, test, scaler: Some(st) })
}

/// Accuracy for classification, mean squared error for regression.
pub fn score(task: Task, y: &Array1<f64>, pred: &Array1<f64>) -> Result<f64> {
    match task {
        Task::Regression => mse(y.view(), pred.view()),
        _ => accuracy(y.view(), pred.view()),
    }
}

pub fn direction(task: Task) -> Direction {
    match task {
        Task::Regression => Direction::Minimize,
        _ => Direction::Maximize,
    }
}

pub fn spkm_decisions(model: &SpkmModel<f64>, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    let scores = model.predict(x)?;
    Ok(model.decide(scores.view()))
}

/// Fixed SPKM settings plus the grids searched on the validation third.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpkmSearch {
    pub base: TrainConfig<f64>,
    pub rescale: bool,
    pub lambdas: Vec<f64>,
    /// `None` means no l1-ball projection.
    pub radii: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Selected<M> {
    pub model: M,
    pub lambda: f64,
    pub radius: Option<f64>,
    pub sigma: f64,
    pub val_score: f64,
    pub test_score: f64,
}

/// Grid search over (λ, radius), ordered by ascending λ then ascending
/// radius with "no projection" last.
pub fn select_spkm(split: &Split, search: &SpkmSearch) -> Result<Selected<SpkmModel<f64>>> {
    let sigma = sigma_heuristic(split.train.x.view())?;
    let kernel = KernelSpec::rbf(sigma)?.with_rescale(search.rescale)?;
    let mut cands = Vec::new();
    for &l in &search.lambdas {
        for &r in &search.radii {
            cands.push((l, r));
        }
    }
    let task = search.base.task;
    let fit_one = |&(lambda, radius): &(f64, Option<f64>)| -> Result<SpkmModel<f64>> {
        let cfg = TrainConfig { lambda, u_ball_radius: radius, ..search.base.clone() };
        Ok(fit(split.train.x.view(), split.train.y.view(), kernel, &cfg)?.0)
    };
    let (best, scores) = grid_search(&cands, direction(task), |c| {
        let m = fit_one(c)?;
        score(task, &split.val.y, &spkm_decisions(&m, split.val.x.view())?)
    })?;
    let model = fit_one(&cands[best])?;
    let test_score = score(task, &split.test.y, &spkm_decisions(&model, split.test.x.view())?)?;
    Ok(Selected {
        model,
        lambda: cands[best].0,
        radius: cands[best].1,
        sigma,
        val_score: scores[best].expect("selected candidate scored"),
        test_score,
    })
}

/// KRR with the raw RBF kernel at the mean-distance bandwidth, λ chosen on
/// the validation third. Classification thresholds the output at 0.
pub fn select_krr(split: &Split, task: Task, lambdas: &[f64]) -> Result<Selected<spkm::baselines::KrrModel<f64>>> {
    let sigma = sigma_heuristic(split.train.x.view())?;
    let kernel = KernelSpec::rbf(sigma)?;
    let predict = |m: &spkm::baselines::KrrModel<f64>, x: ArrayView2<f64>| -> Result<Array1<f64>> {
        let s = m.predict(x)?;
        Ok(if task == Task::Regression { s } else { sign_labels(s.view()) })
    };
    let (best, scores) = grid_search(lambdas, direction(task), |&l| {
        let m = krr_fit(split.train.x.view(), split.train.y.view(), kernel, l)?;
        score(task, &split.val.y, &predict(&m, split.val.x.view())?)
    })?;
    let model = krr_fit(split.train.x.view(), split.train.y.view(), kernel, lambdas[best])?;
    let test_score = score(task, &split.test.y, &predict(&model, split.test.x.view())?)?;
    Ok(Selected { model, lambda: lambdas[best], radius: None, sigma, val_score: scores[best].unwrap(), test_score })
}

/// Where Nyström landmarks come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkSource {
    Spkm,
    Kmeans,
}

/// Ridge regression on Nyström features with `m` landmarks, λ chosen on the
/// validation third; returns (landmarks, validation accuracy, test accuracy).
/// SPKM landmarks are learned with the same raw RBF kernel the feature map
/// uses.
pub fn nystrom_accuracy(
    split: &Split,
    m: usize,
    source: LandmarkSource,
    seed: u64,
    lambdas: &[f64],
    spkm_base: &TrainConfig<f64>,
) -> Result<(ndarray::Array2<f64>, f64, f64)> {
    let sigma = sigma_heuristic(split.train.x.view())?;
    let kernel = KernelSpec::rbf(sigma)?;
    let landmarks = match source {
        LandmarkSource::Kmeans => kmeans(split.train.x.view(), m, seed, 100)?.centroids,
        LandmarkSource::Spkm => {
            let cfg = TrainConfig { r: m, seed, ..spkm_base.clone() };
            fit(split.train.x.view(), split.train.y.view(), kernel, &cfg)?.0.basis().clone()
        }
    };
    let map = NystromMap::new(landmarks.clone(), kernel)?;
    let eval = |l: f64, d: &Dataset<f64>| -> Result<f64> {
        let model = NystromRidge::fit(map.clone(), split.train.x.view(), split.train.y.view(), l)?;
        accuracy(d.y.view(), sign_labels(model.predict(d.x.view())?.view()).view())
    };
    let (best, scores) = grid_search(lambdas, Direction::Maximize, |&l| eval(l, &split.val))?;
    let test = eval(lambdas[best], &split.test)?;
    Ok((landmarks, scores[best].unwrap(), test))
}

/// Default SPKM settings for classification benchmarks.
pub fn classification_defaults(r: usize, seed: u64) -> TrainConfig<f64> {
    TrainConfig { task: Task::Binary, r, loss: LossSpec::Cosine, c_norm: CNorm::L2, seed, ..TrainConfig::default() }
}

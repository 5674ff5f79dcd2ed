//! Alternating minimization with random restarts.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelSpec;
use crate::scalar::Scalar;

use super::config::{Task, TrainConfig};
use super::model::{BasisBlock, SpkmModel};
use super::objective::Objective;
use super::steps::{project_blocks, run_c_step, run_u_step};

/// How often a restart may redraw its basis after a degenerate start.
const MAX_REINITS: usize = 3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeconds {
    pub u_step: f64,
    pub c_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Objective at start and after every basis and weight update, per
    /// restart. Empty for restarts that never got a usable start.
    pub per_restart_objectives: Vec<Vec<f64>>,
    pub best_restart: usize,
    pub final_objective: f64,
    pub u_nnz_fraction: f64,
    pub c_nnz: usize,
    pub phase_seconds: PhaseSeconds,
    /// Basis redraws caused by a degenerate (zero-norm) starting prediction.
    pub reinitializations: usize,
    pub failed_restarts: usize,
    pub outer_iterations: Vec<usize>,
    /// More basis vectors than training samples.
    pub r_exceeds_n: bool,
}

/// One input view for [`fit_mkl`]: its data, kernel and basis count.
#[derive(Clone, Debug)]
pub struct View<'a, T> {
    pub x: ArrayView2<'a, T>,
    pub kernel: KernelSpec<T>,
    pub r: usize,
}

struct RestartResult<T> {
    blocks: Vec<BasisBlock<T>>,
    coef: Array2<T>,
    trace: Vec<f64>,
    value: T,
    outer: usize,
    reinits: usize,
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64 + 1);
    rng
}

fn feature_std<T: Scalar>(x: ArrayView2<T>) -> Vec<T> {
    let n = T::from_usize_lossy(x.nrows());
    x.columns()
        .into_iter()
        .map(|c| {
            let mean = c.iter().copied().sum::<T>() / n;
            (c.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n).sqrt()
        })
        .collect()
}

/// Basis vectors drawn as training rows plus Gaussian jitter of one tenth of
/// each feature's spread. `anchors[r]`, when given, restricts the candidate
/// rows for basis vector `r`.
fn draw_block<T: Scalar>(
    x: ArrayView2<T>,
    kernel: KernelSpec<T>,
    r: usize,
    anchors: Option<&[Vec<usize>]>,
    rng: &mut ChaCha8Rng,
) -> (BasisBlock<T>, Vec<usize>) {
    let (n, d) = x.dim();
    let std = feature_std(x);
    let mut basis = Array2::<T>::zeros((r, d));
    let mut rows = Vec::with_capacity(r);
    for q in 0..r {
        let i = match anchors {
            Some(a) => a[q][rng.gen_range(0..a[q].len())],
            None => rng.gen_range(0..n),
        };
        rows.push(i);
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            basis[[q, j]] = x[[i, j]] + T::lit(0.1 * z) * std[j];
        }
    }
    (BasisBlock::new(kernel, basis), rows)
}

#[derive(Clone)]
enum CoefInit<T> {
    Fixed(Array2<T>),
    /// Row `r` copies the target row of the sample basis vector `r` was
    /// drawn from.
    FromAnchors(Array2<T>),
}

struct Engine<'o, 'a, T: Scalar> {
    obj: &'o Objective<'a, T>,
    kernels: Vec<KernelSpec<T>>,
    rs: Vec<usize>,
    /// Candidate rows per basis vector, concatenated over views.
    anchors: Option<Vec<Vec<usize>>>,
    coef_init: CoefInit<T>,
    task: Task,
}

impl<T: Scalar> Engine<'_, '_, T> {
    fn init(&self, rng: &mut ChaCha8Rng) -> (Vec<BasisBlock<T>>, Array2<T>) {
        let mut blocks = Vec::with_capacity(self.kernels.len());
        let mut drawn = Vec::new();
        let mut offset = 0;
        for (j, (&kernel, &r)) in self.kernels.iter().zip(&self.rs).enumerate() {
            let anchors = self.anchors.as_ref().map(|a| &a[offset..offset + r]);
            let (b, rows) = draw_block(self.obj.view(j), kernel, r, anchors, rng);
            blocks.push(b);
            drawn.extend(rows);
            offset += r;
        }
        let coef = match &self.coef_init {
            CoefInit::Fixed(c) => c.clone(),
            CoefInit::FromAnchors(targets) => targets.select(Axis(0), &drawn),
        };
        (blocks, coef)
    }

    fn run_restart(&self, cfg: &TrainConfig<T>, restart: usize, phases: &mut PhaseSeconds) -> Result<Option<RestartResult<T>>> {
        let mut rng = restart_rng(cfg.seed, restart);
        let mut reinits = 0;
        let (mut blocks, mut coef, start) = loop {
            let (mut blocks, coef) = self.init(&mut rng);
            project_blocks(&mut blocks, cfg.u_ball_radius)?;
            match self.obj.value_parts(&blocks, &coef) {
                Ok(v) => break (blocks, coef, v),
                Err(Error::DegeneratePrediction(_)) if reinits < MAX_REINITS => reinits += 1,
                Err(Error::DegeneratePrediction(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        };
        let mut trace = vec![start.to_f64_lossless()];
        let mut cur = start;
        let mut step = cfg.step_init;
        let mut outer = 0;
        while outer < cfg.outer_max_iters {
            outer += 1;
            let round_start = cur;
            let t = Instant::now();
            cur = run_u_step(self.obj, &mut blocks, &coef, cfg, &mut step)?.value;
            phases.u_step += t.elapsed().as_secs_f64();
            trace.push(cur.to_f64_lossless());
            let t = Instant::now();
            cur = run_c_step(self.obj, &blocks, &mut coef, cfg)?;
            phases.c_step += t.elapsed().as_secs_f64();
            trace.push(cur.to_f64_lossless());
            let denom = round_start.abs().max(T::min_positive_value());
            if (round_start - cur) / denom < cfg.obj_tol {
                break;
            }
        }
        Ok(Some(RestartResult { blocks, coef, trace, value: cur, outer, reinits }))
    }

    fn run(&self, cfg: &TrainConfig<T>) -> Result<(SpkmModel<T>, FitReport)> {
        cfg.validate()?;
        let total_r: usize = self.rs.iter().sum();
        let n = self.obj.n();
        let r_exceeds_n = total_r > n;
        if r_exceeds_n {
            log::warn!("{total_r} basis vectors for {n} samples");
        }
        let mut phases = PhaseSeconds::default();
        let mut traces = Vec::with_capacity(cfg.restarts);
        let mut outers = Vec::with_capacity(cfg.restarts);
        let mut best: Option<(usize, RestartResult<T>)> = None;
        let mut reinits = 0;
        let mut failed = 0;
        for k in 0..cfg.restarts {
            match self.run_restart(cfg, k, &mut phases)? {
                Some(res) => {
                    reinits += res.reinits;
                    traces.push(res.trace.clone());
                    outers.push(res.outer);
                    let better = match &best {
                        Some((_, b)) => res.value < b.value,
                        None => true,
                    };
                    if better {
                        best = Some((k, res));
                    }
                }
                None => {
                    reinits += MAX_REINITS;
                    failed += 1;
                    traces.push(Vec::new());
                    outers.push(0);
                }
            }
        }
        let (best_restart, res) =
            best.ok_or_else(|| Error::Numerical("every restart started from a degenerate prediction".into()))?;
        let model = SpkmModel::new(self.task, self.obj.loss(), res.blocks, res.coef)?;
        let report = FitReport {
            per_restart_objectives: traces,
            best_restart,
            final_objective: res.value.to_f64_lossless(),
            u_nnz_fraction: model.u_nnz_fraction(),
            c_nnz: model.c_nnz(),
            phase_seconds: phases,
            reinitializations: reinits,
            failed_restarts: failed,
            outer_iterations: outers,
            r_exceeds_n,
        };
        Ok((model, report))
    }
}

fn check_binary_labels<T: Scalar>(y: ArrayView1<T>) -> Result<()> {
    if let Some(v) = y.iter().find(|&&v| v != T::one() && v != -T::one()) {
        return Err(Error::Input(format!("binary labels must be -1 or +1, found {v}")));
    }
    Ok(())
}

/// For classification, basis vector `r` starts at a sample whose label
/// matches the sign of its initial weight; a class with no samples falls
/// back to all rows.
fn sign_anchors<T: Scalar>(task: Task, y: ArrayView1<T>, coef: &Array2<T>) -> Option<Vec<Vec<usize>>> {
    if task != Task::Binary {
        return None;
    }
    let all: Vec<usize> = (0..y.len()).collect();
    let class = |s: T| -> Vec<usize> {
        let m: Vec<usize> = all.iter().copied().filter(|&i| y[i] == s).collect();
        if m.is_empty() { all.clone() } else { m }
    };
    let (pos, neg) = (class(T::one()), class(-T::one()));
    Some(coef.column(0).iter().map(|&c| if c > T::zero() { pos.clone() } else { neg.clone() }).collect())
}

/// Weights `+1` for the first `positive` basis vectors, `−1` after.
fn signed_split<T: Scalar>(r: usize, positive: usize) -> Vec<T> {
    (0..r).map(|q| if q < positive { T::one() } else { -T::one() }).collect()
}

/// Initial weights for single-output tasks. Classification splits each
/// block into `+1` and `−1` halves (ties to `+1`); regression draws
/// uniformly from the observed target range.
fn single_output_coef<T: Scalar>(task: Task, y: ArrayView1<T>, rs: &[usize], cfg: &TrainConfig<T>) -> Array2<T> {
    let total: usize = rs.iter().sum();
    let c: Vec<T> = match task {
        Task::Regression => {
            let lo = y.iter().copied().fold(T::infinity(), T::min);
            let hi = y.iter().copied().fold(T::neg_infinity(), T::max);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..total)
                .map(|_| {
                    let t: f64 = rng.gen();
                    lo + (hi - lo) * T::lit(t)
                })
                .collect()
        }
        _ if rs.len() == 1 => signed_split(total, cfg.positive_basis.unwrap_or(total.div_ceil(2))),
        _ => rs.iter().flat_map(|&r| signed_split::<T>(r, r.div_ceil(2))).collect(),
    };
    Array2::from_shape_vec((total, 1), c).expect("column shape")
}

/// Trains a single-view binary or regression model.
pub fn fit<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>, kernel: KernelSpec<T>, cfg: &TrainConfig<T>) -> Result<(SpkmModel<T>, FitReport)> {
    cfg.validate()?;
    if cfg.task == Task::Multiclass {
        return Err(Error::Input("use fit_multiclass for multiclass targets".into()));
    }
    check_dim(x.nrows(), y.len())?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Input("training data is empty".into()));
    }
    if cfg.task == Task::Binary {
        check_binary_labels(y)?;
    }
    let targets = y.to_owned().insert_axis(Axis(1));
    let obj = Objective::new(&[x], targets.view(), cfg.loss, cfg.penalty())?;
    let rs = vec![cfg.r];
    let coef = single_output_coef(cfg.task, y, &rs, cfg);
    Engine {
        obj: &obj,
        kernels: vec![kernel],
        anchors: sign_anchors(cfg.task, y, &coef),
        coef_init: CoefInit::Fixed(coef),
        rs,
        task: cfg.task,
    }
    .run(cfg)
}

/// Joint multiclass model: shared basis, one weight column per class.
///
/// `y_pm1` is the n×classes one-hot matrix with entries ±1. Basis vector `r`
/// is anchored on a sample of the `(r mod classes)`-th class in order of
/// first appearance, and its initial weight row is that sample's target
/// row, so relabeling the classes relabels the solution.
pub fn fit_multiclass<T: Scalar>(
    x: ArrayView2<T>,
    y_pm1: ArrayView2<T>,
    kernel: KernelSpec<T>,
    cfg: &TrainConfig<T>,
) -> Result<(SpkmModel<T>, FitReport)> {
    cfg.validate()?;
    check_dim(x.nrows(), y_pm1.nrows())?;
    if x.nrows() == 0 {
        return Err(Error::Input("training data is empty".into()));
    }
    let classes = y_pm1.ncols();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    let mut order = Vec::new();
    for (i, row) in y_pm1.rows().into_iter().enumerate() {
        if row.iter().any(|&v| v != T::one() && v != -T::one()) {
            return Err(Error::Input(format!("row {i}: one-hot targets must be -1 or +1")));
        }
        let pos: Vec<usize> = (0..classes).filter(|&c| row[c] == T::one()).collect();
        if pos.len() != 1 {
            return Err(Error::Input(format!("row {i}: expected exactly one +1 entry")));
        }
        if members[pos[0]].is_empty() {
            order.push(pos[0]);
        }
        members[pos[0]].push(i);
    }
    if order.len() < 2 {
        return Err(Error::Input("multiclass training needs at least two classes present".into()));
    }
    let anchors: Vec<Vec<usize>> = (0..cfg.r).map(|q| members[order[q % order.len()]].clone()).collect();
    let obj = Objective::new(&[x], y_pm1, cfg.loss, cfg.penalty())?;
    let cfg = TrainConfig { task: Task::Multiclass, ..cfg.clone() };
    Engine {
        obj: &obj,
        kernels: vec![kernel],
        rs: vec![cfg.r],
        anchors: Some(anchors),
        coef_init: CoefInit::FromAnchors(y_pm1.to_owned()),
        task: Task::Multiclass,
    }
    .run(&cfg)
}

/// Multiple-kernel model: every view contributes its own basis vectors,
/// weights are solved jointly across views. `cfg.r` is ignored in favour of
/// the per-view counts.
pub fn fit_mkl<T: Scalar>(views: &[View<T>], y: ArrayView1<T>, cfg: &TrainConfig<T>) -> Result<(SpkmModel<T>, FitReport)> {
    if views.is_empty() {
        return Err(Error::Input("fit_mkl needs at least one view".into()));
    }
    if cfg.task == Task::Multiclass {
        return Err(Error::Input("multi-view training supports binary and regression tasks".into()));
    }
    let rs: Vec<usize> = views.iter().map(|v| v.r).collect();
    let total: usize = rs.iter().sum();
    if total < 1 {
        return Err(Error::Input("views need at least one basis vector in total".into()));
    }
    let cfg = TrainConfig { r: total, ..cfg.clone() };
    cfg.validate()?;
    for v in views {
        check_dim(y.len(), v.x.nrows())?;
    }
    if cfg.task == Task::Binary {
        check_binary_labels(y)?;
    }
    let xs: Vec<ArrayView2<T>> = views.iter().map(|v| v.x).collect();
    let targets = y.to_owned().insert_axis(Axis(1));
    let obj = Objective::new(&xs, targets.view(), cfg.loss, cfg.penalty())?;
    let coef = single_output_coef(cfg.task, y, &rs, &cfg);
    Engine {
        obj: &obj,
        kernels: views.iter().map(|v| v.kernel).collect(),
        anchors: sign_anchors(cfg.task, y, &coef),
        coef_init: CoefInit::Fixed(coef),
        rs,
        task: cfg.task,
    }
    .run(&cfg)
}

/// ±1 one-hot encoding of class indices `0..classes`.
pub fn one_hot_pm1<T: Scalar>(labels: &[usize], classes: usize) -> Result<Array2<T>> {
    let mut y = Array2::from_elem((labels.len(), classes), -T::one());
    for (i, &c) in labels.iter().enumerate() {
        if c >= classes {
            return Err(Error::Input(format!("class index {c} out of range for {classes} classes")));
        }
        y[[i, c]] = T::one();
    }
    Ok(y)
}

/// Class index per row of a ±1 one-hot matrix (argmax).
pub fn argmax_rows<T: Scalar>(y: ArrayView2<T>) -> Array1<usize> {
    y.rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

//! The two alternating updates: projected gradient descent on the basis
//! vectors and a regularized solve for the weights.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{at_b, gram_t, solve_spd, solve_symmetric_pinv};
use crate::losses::LossSpec;
use crate::scalar::Scalar;
use crate::sparseops::{lasso_cd_warm, soft_threshold_scalar, L1Ball};

use super::config::{CNorm, TrainConfig};
use super::model::{BasisBlock, SpkmModel};
use super::objective::{Evaluation, Objective};

const MAX_HALVINGS: usize = 30;

fn relative_decrease<T: Scalar>(old: T, new: T) -> T {
    (old - new) / old.abs().max(T::lit(1e-300).max(T::min_positive_value()))
}

pub(crate) fn project_blocks<T: Scalar>(blocks: &mut [BasisBlock<T>], radius: Option<T>) -> Result<()> {
    if let Some(rad) = radius {
        let ball = L1Ball::new(rad)?;
        for b in blocks.iter_mut() {
            for mut row in b.basis.rows_mut() {
                ball.project_in_place(row.as_slice_mut().expect("standard layout"))?;
            }
        }
    }
    Ok(())
}

/// Result of one basis update.
#[derive(Clone, Debug)]
pub(crate) struct UStepOutcome<T> {
    /// Objective after each accepted iteration.
    pub trace: Vec<T>,
    pub value: T,
}

/// Up to `cfg.u_max_iters` projected-gradient iterations on every basis
/// block with the weights held fixed.
///
/// Each iteration backtracks from the carried step size (scaled by
/// `backtrack_factor`, at most 30 times) until the objective strictly
/// decreases; a successful step lets the next iteration start from a step
/// one factor larger. Trial points where the cosine loss degenerates count
/// as rejected. Stops early once the relative decrease drops below
/// `obj_tol`, or when no decreasing step exists.
pub(crate) fn run_u_step<T: Scalar>(
    obj: &Objective<T>,
    blocks: &mut Vec<BasisBlock<T>>,
    coef: &Array2<T>,
    cfg: &TrainConfig<T>,
    step: &mut T,
) -> Result<UStepOutcome<T>> {
    let pen = obj.penalty().value(coef.iter());
    let mut eval: Evaluation<T> = obj.evaluate(blocks, coef)?;
    let mut cur = eval.loss + pen;
    let mut trace = Vec::new();
    if coef.iter().all(|c| *c == T::zero()) {
        return Ok(UStepOutcome { trace, value: cur });
    }
    for _ in 0..cfg.u_max_iters {
        let lg = obj.loss_grads(&eval.preds)?;
        let grads = obj.basis_gradient(blocks, coef, &lg);
        if grads.iter().all(|g| g.iter().all(|v| *v == T::zero())) {
            break;
        }
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = blocks.clone();
            for (b, g) in trial.iter_mut().zip(&grads) {
                b.basis.scaled_add(-*step, g);
            }
            project_blocks(&mut trial, cfg.u_ball_radius)?;
            match obj.evaluate(&trial, coef) {
                Ok(e) if e.loss + pen < cur && (e.loss + pen).is_finite() => {
                    accepted = Some((trial, e));
                    break;
                }
                Ok(_) | Err(Error::DegeneratePrediction(_)) => *step *= cfg.backtrack_factor,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, e)) = accepted else { break };
        let new = e.loss + pen;
        let rel = relative_decrease(cur, new);
        *blocks = trial;
        eval = e;
        cur = new;
        trace.push(cur);
        *step /= cfg.backtrack_factor;
        if rel < cfg.obj_tol {
            break;
        }
    }
    Ok(UStepOutcome { trace, value: cur })
}

/// Weight update with the basis fixed. Returns the new objective value; the
/// candidate replaces `coef` only when it does not increase the objective.
pub(crate) fn run_c_step<T: Scalar>(
    obj: &Objective<T>,
    blocks: &[BasisBlock<T>],
    coef: &mut Array2<T>,
    cfg: &TrainConfig<T>,
) -> Result<T> {
    let features = obj.features(blocks);
    let penalty = obj.penalty();
    let value_of = |c: &Array2<T>| -> Result<T> {
        let preds = Objective::predictions(&features, c);
        Ok(obj.loss_of(&preds)? + penalty.value(c.iter()))
    };
    let cur = value_of(coef)?;
    let candidate = match (obj.loss(), penalty.norm) {
        (LossSpec::Squared, CNorm::L2) => ridge_weights(&features, obj.targets(), penalty.lambda)?,
        (LossSpec::Squared, CNorm::L1) => lasso_weights(&features, obj.targets(), penalty.lambda, coef)?,
        (LossSpec::Cosine, _) => {
            let (c, _) = prox_gradient_weights(obj, &features, coef, cfg, cur)?;
            c
        }
    };
    if candidate.iter().all(|v| v.is_finite()) {
        if let Ok(new) = value_of(&candidate) {
            if new <= cur {
                *coef = candidate;
                return Ok(new);
            }
        }
    }
    Ok(cur)
}

/// `(KᵀK + λI) C = KᵀY`; falls back to the minimum-norm least-squares
/// solution when the system is singular (λ = 0).
fn ridge_weights<T: Scalar>(features: &Array2<T>, targets: &[Vec<T>], lambda: T) -> Result<Array2<T>> {
    let r = features.ncols();
    let mut a = gram_t(features.view());
    for q in 0..r {
        a[[q, q]] += lambda;
    }
    let y = targets_matrix(targets);
    let b = at_b(features.view(), y.view());
    match solve_spd(a.view(), b.view()) {
        Ok(c) if c.iter().all(|v| v.is_finite()) => Ok(c),
        _ => solve_symmetric_pinv(a.view(), b.view(), T::lit(1e-12)),
    }
}

fn lasso_weights<T: Scalar>(
    features: &Array2<T>,
    targets: &[Vec<T>],
    lambda: T,
    warm: &Array2<T>,
) -> Result<Array2<T>> {
    let mut out = Array2::<T>::zeros(warm.dim());
    for (col, y) in targets.iter().enumerate() {
        let init = warm.column(col).to_vec();
        let fit = lasso_cd_warm(
            features.view(),
            ArrayView1::from(y.as_slice()),
            lambda,
            T::lit(1e-10),
            10_000,
            Some(&init),
        )?;
        out.column_mut(col).assign(&fit.coef);
    }
    Ok(out)
}

/// Proximal gradient on the weights for losses without a closed-form
/// minimizer. l1 uses soft-thresholding, squared l2 the shrink `c/(1+2ηλ)`.
fn prox_gradient_weights<T: Scalar>(
    obj: &Objective<T>,
    features: &Array2<T>,
    coef: &Array2<T>,
    cfg: &TrainConfig<T>,
    start_value: T,
) -> Result<(Array2<T>, T)> {
    let penalty = obj.penalty();
    let mut c = coef.clone();
    let mut cur = start_value;
    let mut step = cfg.step_init;
    for _ in 0..cfg.c_max_iters {
        let preds = Objective::predictions(features, &c);
        let lg = obj.loss_grads(&preds)?;
        let grad = Objective::coef_gradient(features, &lg);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = &c - &(&grad * step);
            let shrink = step * penalty.lambda;
            match penalty.norm {
                CNorm::L1 => trial.mapv_inplace(|v| soft_threshold_scalar(v, shrink)),
                CNorm::L2 => {
                    let f = T::one() / (T::one() + T::two() * shrink);
                    trial.mapv_inplace(|v| v * f)
                }
            }
            let p = Objective::predictions(features, &trial);
            match obj.loss_of(&p) {
                Ok(l) => {
                    let v = l + penalty.value(trial.iter());
                    if v < cur {
                        accepted = Some((trial, v));
                        break;
                    }
                    step *= cfg.backtrack_factor;
                }
                Err(Error::DegeneratePrediction(_)) => step *= cfg.backtrack_factor,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, new)) = accepted else { break };
        let rel = relative_decrease(cur, new);
        c = trial;
        cur = new;
        step /= cfg.backtrack_factor;
        if rel < cfg.obj_tol {
            break;
        }
    }
    Ok((c, cur))
}

fn targets_matrix<T: Scalar>(targets: &[Vec<T>]) -> Array2<T> {
    let n = targets[0].len();
    Array2::from_shape_fn((n, targets.len()), |(i, c)| targets[c][i])
}

fn single_output_objective<'a, T: Scalar>(
    model: &SpkmModel<T>,
    x: ArrayView2<'a, T>,
    y: ArrayView1<T>,
    cfg: &TrainConfig<T>,
) -> Result<Objective<'a, T>> {
    let n = y.len();
    let targets = y.to_owned().into_shape_with_order((n, 1)).expect("column");
    Objective::new(&[x], targets.view(), model.loss(), cfg.penalty())
}

/// One basis update on a single-view, single-output model. Returns the
/// updated model and the objective after each accepted iteration.
pub fn u_step<T: Scalar>(
    model: &SpkmModel<T>,
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    cfg: &TrainConfig<T>,
) -> Result<(SpkmModel<T>, Vec<T>)> {
    let obj = single_output_objective(model, x, y, cfg)?;
    u_step_with(&obj, model, cfg)
}

/// [`u_step`] against an arbitrary objective (several views or outputs).
/// A starting basis outside the l1 ball is projected onto it first.
pub fn u_step_with<T: Scalar>(
    obj: &Objective<T>,
    model: &SpkmModel<T>,
    cfg: &TrainConfig<T>,
) -> Result<(SpkmModel<T>, Vec<T>)> {
    obj.value(model)?;
    let mut blocks = model.blocks().to_vec();
    project_blocks(&mut blocks, cfg.u_ball_radius)?;
    let mut step = cfg.step_init;
    let out = run_u_step(obj, &mut blocks, model.coef(), cfg, &mut step)?;
    Ok((model.with_blocks(blocks)?, out.trace))
}

/// One weight update on a single-view, single-output model.
pub fn c_step<T: Scalar>(
    model: &SpkmModel<T>,
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    cfg: &TrainConfig<T>,
) -> Result<SpkmModel<T>> {
    let obj = single_output_objective(model, x, y, cfg)?;
    c_step_with(&obj, model, cfg)
}

pub fn c_step_with<T: Scalar>(obj: &Objective<T>, model: &SpkmModel<T>, cfg: &TrainConfig<T>) -> Result<SpkmModel<T>> {
    obj.value(model)?;
    let mut coef = model.coef().clone();
    run_c_step(obj, model.blocks(), &mut coef, cfg)?;
    model.with_coef(coef)
}

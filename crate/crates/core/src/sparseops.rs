//! Sparsity operators: Euclidean projection onto an l1 ball, the
//! soft-threshold prox, and a cyclic coordinate-descent lasso solver.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{norm1, Scalar};

/// `{w : ‖w‖₁ ≤ radius}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Ball<T> {
    radius: T,
}

impl<T: Scalar> L1Ball<T> {
    pub fn new(radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::Input(format!("l1 ball radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    /// Euclidean projection of `v` onto the ball, in place.
    ///
    /// Sort-and-threshold: find the common shrinkage `θ` such that
    /// `Σ max(|v_i| − θ, 0) = radius`, then shrink every coordinate by it.
    /// Coordinates that fall below `θ` become exactly zero.
    pub fn project_in_place(&self, v: &mut [T]) -> Result<()> {
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Input("cannot project non-finite vector".into()));
        }
        let theta = match self.threshold(v) {
            Some(t) => t,
            None => return Ok(()),
        };
        for x in v.iter_mut() {
            let mag = x.abs() - theta;
            *x = if mag > T::zero() { x.signum() * mag } else { T::zero() };
        }
        Ok(())
    }

    pub fn project(&self, v: &[T]) -> Result<Vec<T>> {
        let mut w = v.to_vec();
        self.project_in_place(&mut w)?;
        Ok(w)
    }

    /// Shrinkage `θ` the projection applies, or `None` if `v` is already
    /// inside the ball.
    fn threshold(&self, v: &[T]) -> Option<T> {
        if norm1(v) <= self.radius {
            return None;
        }
        let mut mu: Vec<T> = v.iter().map(|x| x.abs()).collect();
        mu.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        let mut cumsum = T::zero();
        let mut theta = T::zero();
        for (j, &m) in mu.iter().enumerate() {
            cumsum += m;
            let t = (cumsum - self.radius) / T::from_usize_lossy(j + 1);
            if m - t > T::zero() {
                theta = t;
            } else {
                break;
            }
        }
        Some(theta.max(T::zero()))
    }
}

/// Free-function form of [`L1Ball::project`].
pub fn project_l1<T: Scalar>(v: &[T], ball: &L1Ball<T>) -> Result<Vec<T>> {
    ball.project(v)
}

#[inline]
pub fn soft_threshold_scalar<T: Scalar>(v: T, t: T) -> T {
    let mag = v.abs() - t;
    if mag > T::zero() {
        v.signum() * mag
    } else {
        T::zero()
    }
}

/// Componentwise `sign(v)·max(|v| − t, 0)`.
pub fn soft_threshold<T: Scalar>(v: &[T], t: T) -> Result<Vec<T>> {
    if !(t >= T::zero()) {
        return Err(Error::Input(format!("threshold must be non-negative, got {t}")));
    }
    Ok(v.iter().map(|&x| soft_threshold_scalar(x, t)).collect())
}

/// Outcome of a coordinate-descent lasso run.
#[derive(Clone, Debug)]
pub struct LassoFit<T> {
    pub coef: Array1<T>,
    pub sweeps: usize,
    pub converged: bool,
}

/// `‖Ac − y‖² + λ‖c‖₁`.
pub fn lasso_objective<T: Scalar>(a: ArrayView2<T>, y: ArrayView1<T>, lambda: T, c: &[T]) -> T {
    let mut loss = T::zero();
    for (row, &yi) in a.rows().into_iter().zip(y) {
        let pred: T = row.iter().zip(c).map(|(&x, &w)| x * w).sum();
        loss += (pred - yi) * (pred - yi);
    }
    loss + lambda * norm1(c)
}

/// Minimizes `‖Ac − y‖² + λ‖c‖₁` by cyclic coordinate descent.
///
/// Each coordinate update is exact: `c_j = S(A_jᵀ r_j, λ/2) / ‖A_j‖²` with
/// `r_j` the residual excluding coordinate `j`. Columns that are entirely
/// zero keep `c_j = 0`. Stops when the largest coordinate change in a sweep
/// drops below `tol`, or after `max_iter` sweeps.
pub fn lasso_cd<T: Scalar>(
    a: ArrayView2<T>,
    y: ArrayView1<T>,
    lambda: T,
    tol: T,
    max_iter: usize,
) -> Result<LassoFit<T>> {
    lasso_cd_warm(a, y, lambda, tol, max_iter, None)
}

pub fn lasso_cd_warm<T: Scalar>(
    a: ArrayView2<T>,
    y: ArrayView1<T>,
    lambda: T,
    tol: T,
    max_iter: usize,
    init: Option<&[T]>,
) -> Result<LassoFit<T>> {
    let (n, r) = a.dim();
    check_dim(n, y.len())?;
    if n == 0 || r == 0 {
        return Err(Error::Input("lasso needs a non-empty design matrix".into()));
    }
    if !(lambda >= T::zero()) {
        return Err(Error::Input(format!("lasso lambda must be non-negative, got {lambda}")));
    }
    let cols: Vec<Vec<T>> = (0..r).map(|j| a.column(j).to_vec()).collect();
    let col_sq: Vec<T> = cols.iter().map(|c| c.iter().map(|&v| v * v).sum()).collect();

    let mut coef = match init {
        Some(c0) => {
            check_dim(r, c0.len())?;
            c0.to_vec()
        }
        None => vec![T::zero(); r],
    };
    for j in 0..r {
        if col_sq[j] == T::zero() {
            coef[j] = T::zero();
        }
    }
    let mut resid: Vec<T> = y.to_vec();
    for (j, col) in cols.iter().enumerate() {
        if coef[j] != T::zero() {
            for (ri, &aij) in resid.iter_mut().zip(col) {
                *ri -= aij * coef[j];
            }
        }
    }

    let half_lambda = lambda * T::half();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_change = T::zero();
        for j in 0..r {
            if col_sq[j] == T::zero() {
                continue;
            }
            let col = &cols[j];
            let old = coef[j];
            let rho: T = col.iter().zip(&resid).map(|(&aij, &ri)| aij * ri).sum::<T>() + col_sq[j] * old;
            let new = soft_threshold_scalar(rho, half_lambda) / col_sq[j];
            let delta = new - old;
            if delta != T::zero() {
                for (ri, &aij) in resid.iter_mut().zip(col) {
                    *ri -= aij * delta;
                }
                coef[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < tol {
            converged = true;
            break;
        }
    }
    Ok(LassoFit { coef: Array1::from(coef), sweeps, converged })
}

/// Smallest λ for which `c = 0` is optimal: `max_j |2 A_jᵀ y|`.
pub fn lasso_lambda_max<T: Scalar>(a: ArrayView2<T>, y: ArrayView1<T>) -> T {
    (0..a.ncols())
        .map(|j| (T::two() * a.column(j).iter().zip(y).map(|(&x, &v)| x * v).sum::<T>()).abs())
        .fold(T::zero(), T::max)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Labels in {−1, +1}; decision is the sign of the score.
    Binary,
    Regression,
    /// One column per class; decision is the argmax column.
    Multiclass,
}

/// Norm used in the weight penalty `λ·‖c‖`.
///
/// `L2` is the squared Euclidean norm, so the squared-loss weight update is
/// an ordinary ridge solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum CNorm {
    L1,
    L2,
}

impl TryFrom<u8> for CNorm {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(CNorm::L1),
            2 => Ok(CNorm::L2),
            other => Err(Error::Input(format!("c-norm must be 1 or 2, got {other}"))),
        }
    }
}

impl From<CNorm> for u8 {
    fn from(n: CNorm) -> u8 {
        match n {
            CNorm::L1 => 1,
            CNorm::L2 => 2,
        }
    }
}

/// Weight penalty `λ·Σ|c|` or `λ·Σc²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalty<T> {
    pub norm: CNorm,
    pub lambda: T,
}

impl<T: Scalar> Penalty<T> {
    pub fn value<'a>(&self, coef: impl IntoIterator<Item = &'a T>) -> T {
        if self.lambda == T::zero() {
            return T::zero();
        }
        let s: T = match self.norm {
            CNorm::L1 => coef.into_iter().map(|c| c.abs()).sum(),
            CNorm::L2 => coef.into_iter().map(|&c| c * c).sum(),
        };
        self.lambda * s
    }
}

/// Everything that controls a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainConfig<T> {
    pub task: Task,
    /// Number of basis vectors.
    pub r: usize,
    pub loss: LossSpec,
    pub c_norm: CNorm,
    pub lambda: T,
    /// Per-row l1 radius for the basis vectors; `None` disables projection.
    pub u_ball_radius: Option<T>,
    pub restarts: usize,
    pub u_max_iters: usize,
    /// Iteration cap for the gradient-based weight update (cosine loss).
    pub c_max_iters: usize,
    pub outer_max_iters: usize,
    pub step_init: T,
    pub backtrack_factor: T,
    pub obj_tol: T,
    pub seed: u64,
    /// Number of basis vectors initialized with weight +1 in classification;
    /// `None` means `ceil(r / 2)`.
    pub positive_basis: Option<usize>,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            task: Task::Binary,
            r: 5,
            loss: LossSpec::Cosine,
            c_norm: CNorm::L2,
            lambda: T::lit(1e-3),
            u_ball_radius: None,
            restarts: 5,
            u_max_iters: 20,
            c_max_iters: 50,
            outer_max_iters: 50,
            step_init: T::one(),
            backtrack_factor: T::half(),
            obj_tol: T::lit(1e-5),
            seed: 0,
            positive_basis: None,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Input(m.to_string()));
        if self.r < 1 {
            return bad("r must be >= 1");
        }
        if self.restarts < 1 {
            return bad("restarts must be >= 1");
        }
        if self.u_max_iters < 1 {
            return bad("u_max_iters must be >= 1");
        }
        if self.outer_max_iters < 1 {
            return bad("outer_max_iters must be >= 1");
        }
        if !(self.backtrack_factor > T::zero() && self.backtrack_factor < T::one()) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.obj_tol > T::zero()) {
            return bad("obj_tol must be positive");
        }
        if !(self.step_init > T::zero()) || !self.step_init.is_finite() {
            return bad("step_init must be positive");
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return bad("lambda must be a non-negative number");
        }
        if let Some(rad) = self.u_ball_radius {
            if !(rad > T::zero()) || !rad.is_finite() {
                return bad("u_ball_radius must be positive");
            }
        }
        if let Some(p) = self.positive_basis {
            if p > self.r {
                return bad("positive_basis cannot exceed r");
            }
        }
        Ok(())
    }

    pub fn penalty(&self) -> Penalty<T> {
        Penalty { norm: self.c_norm, lambda: self.lambda }
    }
}

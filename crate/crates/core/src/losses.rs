//! Training losses over the prediction vector `ŷ = k(X, U) c`.
//!
//! The optimizer only consumes `L(ŷ, y)` and `∂L/∂ŷ`, so adding a loss means
//! adding one variant with its value and gradient.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{dot, Scalar};

/// Predictions with Euclidean norm below this make the cosine loss undefined.
pub const COSINE_DEGENERATE_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossSpec {
    /// `‖ŷ − y‖²`, unnormalized.
    Squared,
    /// `−yᵀŷ / ‖ŷ‖`.
    #[serde(alias = "cosine_proximity")]
    Cosine,
}

impl LossSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Squared => "squared",
            LossSpec::Cosine => "cosine",
        }
    }

    pub fn value<T: Scalar>(&self, yhat: &[T], y: &[T]) -> Result<T> {
        check_dim(y.len(), yhat.len())?;
        if y.is_empty() {
            return Err(Error::Input("loss needs at least one sample".into()));
        }
        match self {
            LossSpec::Squared => Ok(yhat.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum()),
            LossSpec::Cosine => {
                let norm = cosine_norm(yhat)?;
                Ok(-dot(y, yhat) / norm)
            }
        }
    }

    /// `∂L/∂ŷ` written into `out`.
    pub fn grad_into<T: Scalar>(&self, yhat: &[T], y: &[T], out: &mut [T]) -> Result<()> {
        check_dim(y.len(), yhat.len())?;
        check_dim(y.len(), out.len())?;
        match self {
            LossSpec::Squared => {
                for ((o, &a), &b) in out.iter_mut().zip(yhat).zip(y) {
                    *o = T::two() * (a - b);
                }
            }
            LossSpec::Cosine => {
                let norm = cosine_norm(yhat)?;
                let proj = dot(y, yhat) / (norm * norm * norm);
                for ((o, &a), &b) in out.iter_mut().zip(yhat).zip(y) {
                    *o = -b / norm + proj * a;
                }
            }
        }
        Ok(())
    }

    pub fn grad<T: Scalar>(&self, yhat: &[T], y: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); yhat.len()];
        self.grad_into(yhat, y, &mut out)?;
        Ok(out)
    }
}

fn cosine_norm<T: Scalar>(yhat: &[T]) -> Result<T> {
    let norm = dot(yhat, yhat).sqrt();
    if !(norm >= T::lit(COSINE_DEGENERATE_NORM)) {
        return Err(Error::DegeneratePrediction(norm.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_grad(loss: LossSpec, yhat: &[f64], y: &[f64], h: f64) -> Vec<f64> {
        (0..yhat.len())
            .map(|i| {
                let mut p = yhat.to_vec();
                let mut m = yhat.to_vec();
                p[i] += h;
                m[i] -= h;
                (loss.value(&p, y).unwrap() - loss.value(&m, y).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        diff / b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0)
    }

    #[test]
    fn squared_examples() {
        let l = LossSpec::Squared;
        assert_eq!(l.value(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(l.value(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(l.grad(&[0.5, -1.0], &[0.5, -1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn cosine_examples() {
        let l = LossSpec::Cosine;
        let s = 0.5f64.sqrt();
        let y = [s, -s];
        assert!((l.value(&[3.0 * s, -3.0 * s], &y).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(l.value(&[1.0, 1.0], &[1.0, -1.0]).unwrap(), 0.0);
        let g = l.grad(&[2.0 * s, -2.0 * s], &y).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn cosine_degenerate_prediction() {
        let l = LossSpec::Cosine;
        assert!(matches!(l.value(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::DegeneratePrediction(_))));
        assert!(l.grad(&[1e-14, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn length_mismatch() {
        assert!(LossSpec::Squared.value(&[1.0], &[1.0, 2.0]).is_err());
        assert!(LossSpec::Cosine.grad(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for loss in [LossSpec::Squared, LossSpec::Cosine] {
            for _ in 0..100 {
                let yhat: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let y: Vec<f64> = (0..8).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
                if loss == LossSpec::Cosine && yhat.iter().map(|v| v * v).sum::<f64>() < 0.25 {
                    continue;
                }
                let g = loss.grad(&yhat, &y).unwrap();
                let fd = fd_grad(loss, &yhat, &y, 1e-6);
                assert!(rel_err(&g, &fd) < 1e-6, "{loss:?}");
            }
        }
    }

    #[test]
    fn serde_tags() {
        assert_eq!(serde_json::to_string(&LossSpec::Squared).unwrap(), "\"squared\"");
        assert_eq!(serde_json::to_string(&LossSpec::Cosine).unwrap(), "\"cosine\"");
        assert_eq!(serde_json::from_str::<LossSpec>("\"cosine\"").unwrap(), LossSpec::Cosine);
    }

    proptest! {
        #[test]
        fn cosine_is_scale_invariant(
            yhat in prop::collection::vec(0.1f64..3.0, 5),
            y in prop::collection::vec(-2.0f64..2.0, 5),
            alpha in 0.01f64..100.0,
        ) {
            let l = LossSpec::Cosine;
            let scaled: Vec<f64> = yhat.iter().map(|v| v * alpha).collect();
            let a = l.value(&yhat, &y).unwrap();
            let b = l.value(&scaled, &y).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(a >= -ynorm - 1e-12 && a <= ynorm + 1e-12);
        }

        #[test]
        fn squared_nonnegative(
            yhat in prop::collection::vec(-5.0f64..5.0, 1..10),
        ) {
            let y: Vec<f64> = yhat.iter().map(|v| v * 0.5).collect();
            let v = LossSpec::Squared.value(&yhat, &y).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v == 0.0, yhat.iter().all(|x| *x == 0.0));
        }
    }
}

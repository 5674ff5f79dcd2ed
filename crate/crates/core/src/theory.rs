//! Rademacher complexity of the sparse pre-image hypothesis class: the
//! closed-form bound `τΛ/√n` and a Monte-Carlo estimate of the quantity it
//! bounds.

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::scalar::Scalar;

/// Inputs of the bound: `k(x,x) ≤ tau`, `‖c‖₁ ≤ lambda_bound`, `n` samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub tau: f64,
    pub lambda_bound: f64,
    pub n: usize,
}

impl BoundInputs {
    pub fn new(tau: f64, lambda_bound: f64, n: usize) -> Result<Self> {
        let b = Self { tau, lambda_bound, n };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Input(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.lambda_bound > 0.0 && self.lambda_bound.is_finite()) {
            return Err(Error::Input(format!("Lambda must be positive, got {}", self.lambda_bound)));
        }
        if self.n == 0 {
            return Err(Error::Input("n must be at least 1".into()));
        }
        Ok(())
    }
}

/// `√(τ²Λ²/n)`
pub fn rademacher_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    Ok((b.tau * b.tau * b.lambda_bound * b.lambda_bound / b.n as f64).sqrt())
}

/// Restarts of the inner maximization over each basis vector.
pub const INNER_RESTARTS: usize = 10;
const ASCENT_ITERS: usize = 50;
const MAX_HALVINGS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub mean: f64,
    /// Standard error of the mean over trials (0 for a single trial).
    pub stderr: f64,
    pub per_trial: Vec<f64>,
}

/// Monte-Carlo estimate of `(1/n) E_σ sup_{U, ‖c‖₁≤Λ} σᵀ k(X,U) c`.
///
/// For fixed `U` the supremum over the l1 ball puts all of `Λ` on the basis
/// vector with the largest `|σᵀk(X,u_r)|`, so the inner problem reduces to
/// maximizing `|σᵀk(X,u)|` over a single `u`; this is done by gradient
/// ascent from `INNER_RESTARTS × r` data-anchored starts. Any feasible `u`
/// gives a lower estimate of the supremum.
pub fn empirical_rademacher<T: Scalar>(
    x: ArrayView2<T>,
    kernel: &KernelSpec<T>,
    lambda_bound: f64,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<RademacherEstimate> {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return Err(Error::Input("empirical Rademacher needs non-empty data".into()));
    }
    if trials == 0 || r == 0 {
        return Err(Error::Input("trials and r must be at least 1".into()));
    }
    if !(lambda_bound >= 0.0 && lambda_bound.is_finite()) {
        return Err(Error::Input(format!("Lambda must be non-negative, got {lambda_bound}")));
    }
    let x = x.as_standard_layout();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.iter().map(|v| v.to_f64_lossless()).collect()).collect();
    let spread: Vec<f64> = (0..d)
        .map(|j| {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            (rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n as f64).sqrt()
        })
        .collect();
    let k64 = kernel_f64(kernel)?;
    let mut per_trial = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let sigma: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let mut best = 0.0f64;
        if lambda_bound > 0.0 {
            for _ in 0..INNER_RESTARTS * r {
                let i = rng.gen_range(0..n);
                let u0: Vec<f64> = (0..d)
                    .map(|j| rows[i][j] + 0.1 * spread[j] * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                best = best.max(ascend(&k64, &rows, &sigma, u0));
            }
        }
        per_trial.push(lambda_bound * (best / n as f64));
    }
    let mean = per_trial.iter().sum::<f64>() / trials as f64;
    let stderr = if trials > 1 {
        let var = per_trial.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(RademacherEstimate { mean, stderr, per_trial })
}

fn kernel_f64<T: Scalar>(k: &KernelSpec<T>) -> Result<KernelSpec<f64>> {
    use crate::kernels::KernelFamily;
    match k.family() {
        KernelFamily::Rbf => KernelSpec::rbf(k.sigma().to_f64_lossless())?.with_rescale(k.rescale()),
        KernelFamily::Polynomial => KernelSpec::polynomial(k.degree(), k.offset().to_f64_lossless()),
        KernelFamily::Linear => Ok(KernelSpec::linear()),
    }
}

fn correlation(k: &KernelSpec<f64>, rows: &[Vec<f64>], sigma: &[f64], u: &[f64]) -> f64 {
    rows.iter().zip(sigma).map(|(x, s)| s * k.eval_unchecked(x, u)).sum()
}

/// Gradient ascent with backtracking on `|σᵀk(X,u)|`; returns the best value.
fn ascend(k: &KernelSpec<f64>, rows: &[Vec<f64>], sigma: &[f64], mut u: Vec<f64>) -> f64 {
    let d = u.len();
    let mut cur = correlation(k, rows, sigma, &u).abs();
    let mut step = 1.0;
    for _ in 0..ASCENT_ITERS {
        let sign = correlation(k, rows, sigma, &u).signum();
        let mut g = vec![0.0; d];
        for (x, s) in rows.iter().zip(sigma) {
            let (_, a, b) = k.value_and_grad_coeffs(x, &u);
            for j in 0..d {
                g[j] += sign * s * (a * x[j] + b * u[j]);
            }
        }
        if g.iter().all(|v| *v == 0.0) {
            break;
        }
        let mut moved = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&g).map(|(ui, gi)| ui + step * gi).collect();
            let v = correlation(k, rows, sigma, &trial).abs();
            if v > cur && v.is_finite() {
                u = trial;
                cur = v;
                moved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    cur
}

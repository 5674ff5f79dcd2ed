//! Differentiable kernels `k(x, u)` with analytic gradients in the second
//! argument.
//!
//! The RBF kernel can optionally be rescaled from its native range `(0, 1]`
//! to `(-1, 1]` through `v -> 2v - 1`; the same map is applied at training
//! and prediction time and its factor of two is carried into the gradient.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{dot, sq_dist, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Rbf,
    #[serde(alias = "poly")]
    Polynomial,
    Linear,
}

/// Kernel family plus parameters.
///
/// Serialized as a flat JSON object carrying only the keys relevant to the
/// family, e.g. `{"family":"rbf","sigma":1.5,"rescale":true}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr<T>", into = "KernelRepr<T>")]
#[serde(bound = "T: Scalar")]
pub struct KernelSpec<T> {
    family: KernelFamily,
    sigma: T,
    degree: u32,
    offset: T,
    rescale: bool,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn rbf(sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::Input(format!("rbf sigma must be positive, got {sigma}")));
        }
        Ok(Self { family: KernelFamily::Rbf, sigma, degree: 0, offset: T::zero(), rescale: false })
    }

    /// RBF kernel with values mapped to `2k - 1`.
    pub fn rbf_rescaled(sigma: T) -> Result<Self> {
        Self::rbf(sigma)?.with_rescale(true)
    }

    /// `(x·u + offset)^degree`.
    pub fn polynomial(degree: u32, offset: T) -> Result<Self> {
        if degree < 1 {
            return Err(Error::Input("polynomial degree must be >= 1".into()));
        }
        if !offset.is_finite() {
            return Err(Error::Input("polynomial offset must be finite".into()));
        }
        Ok(Self { family: KernelFamily::Polynomial, sigma: T::one(), degree, offset, rescale: false })
    }

    pub fn linear() -> Self {
        Self { family: KernelFamily::Linear, sigma: T::one(), degree: 1, offset: T::zero(), rescale: false }
    }

    /// Toggles the `[0,1] -> [-1,1]` value map. Only the RBF family has the
    /// `[0,1]` range the map assumes.
    pub fn with_rescale(mut self, rescale: bool) -> Result<Self> {
        if rescale && self.family != KernelFamily::Rbf {
            return Err(Error::Input("rescale is only valid for the rbf kernel".into()));
        }
        self.rescale = rescale;
        Ok(self)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn rescale(&self) -> bool {
        self.rescale
    }

    /// Upper bound on `k(x, x)` when one exists independently of the data.
    pub fn diagonal_bound(&self) -> Option<T> {
        match self.family {
            KernelFamily::Rbf => Some(T::one()),
            _ => None,
        }
    }

    #[inline]
    fn raw(&self, x: &[T], u: &[T]) -> T {
        match self.family {
            KernelFamily::Rbf => {
                let s2 = self.sigma * self.sigma;
                (-sq_dist(x, u) / (T::two() * s2)).exp()
            }
            KernelFamily::Polynomial => (dot(x, u) + self.offset).powi(self.degree as i32),
            KernelFamily::Linear => dot(x, u),
        }
    }

    #[inline]
    fn finish(&self, raw: T) -> T {
        if self.rescale {
            T::two() * raw - T::one()
        } else {
            raw
        }
    }

    /// Kernel value without dimension checks; callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[T], u: &[T]) -> T {
        self.finish(self.raw(x, u))
    }

    /// Value plus the coefficients `(a, b)` with `d k / d u = a·x + b·u`.
    ///
    /// Every supported family has a gradient of this form, which lets the
    /// optimizer accumulate `Σ_i w_i ∇_u k(x_i, u)` as two running sums.
    #[inline]
    pub(crate) fn value_and_grad_coeffs(&self, x: &[T], u: &[T]) -> (T, T, T) {
        let scale = if self.rescale { T::two() } else { T::one() };
        match self.family {
            KernelFamily::Rbf => {
                let raw = self.raw(x, u);
                let a = scale * raw / (self.sigma * self.sigma);
                (self.finish(raw), a, -a)
            }
            KernelFamily::Polynomial => {
                let s = dot(x, u) + self.offset;
                let p = self.degree as i32;
                let value = s.powi(p);
                let a = T::from_usize_lossy(self.degree as usize) * s.powi(p - 1);
                (value, a, T::zero())
            }
            KernelFamily::Linear => (dot(x, u), T::one(), T::zero()),
        }
    }

    /// `k(x, u)`, rescaled when the spec asks for it.
    pub fn eval(&self, x: &[T], u: &[T]) -> Result<T> {
        check_dim(x.len(), u.len())?;
        Ok(self.eval_unchecked(x, u))
    }

    /// Gradient of `k(x, u)` with respect to `u`.
    ///
    /// For RBF this is `k(x,u)/σ² · (x − u)`, doubled under rescaling.
    pub fn grad_u(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        check_dim(x.len(), u.len())?;
        let (_, a, b) = self.value_and_grad_coeffs(x, u);
        Ok(x.iter().zip(u).map(|(&xi, &ui)| a * xi + b * ui).collect())
    }

    /// Matrix of kernel values between the rows of `a` (n×d) and `b` (m×d).
    pub fn gram(&self, a: ArrayView2<T>, b: ArrayView2<T>) -> Result<Array2<T>> {
        check_dim(a.ncols(), b.ncols())?;
        let a = a.as_standard_layout();
        let b = b.as_standard_layout();
        let mut out = Array2::<T>::zeros((a.nrows(), b.nrows()));
        for (i, ra) in a.rows().into_iter().enumerate() {
            let ra = ra.to_slice().expect("standard layout");
            for (j, rb) in b.rows().into_iter().enumerate() {
                out[[i, j]] = self.eval_unchecked(ra, rb.to_slice().expect("standard layout"));
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct KernelRepr<T> {
    family: KernelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<T>,
    #[serde(default)]
    rescale: bool,
}

impl<T: Scalar> From<KernelSpec<T>> for KernelRepr<T> {
    fn from(k: KernelSpec<T>) -> Self {
        match k.family {
            KernelFamily::Rbf => Self {
                family: k.family,
                sigma: Some(k.sigma),
                degree: None,
                offset: None,
                rescale: k.rescale,
            },
            KernelFamily::Polynomial => Self {
                family: k.family,
                sigma: None,
                degree: Some(k.degree),
                offset: Some(k.offset),
                rescale: false,
            },
            KernelFamily::Linear => {
                Self { family: k.family, sigma: None, degree: None, offset: None, rescale: false }
            }
        }
    }
}

impl<T: Scalar> TryFrom<KernelRepr<T>> for KernelSpec<T> {
    type Error = Error;

    fn try_from(r: KernelRepr<T>) -> Result<Self> {
        let spec = match r.family {
            KernelFamily::Rbf => {
                let sigma = r.sigma.ok_or_else(|| Error::Input("rbf kernel needs sigma".into()))?;
                KernelSpec::rbf(sigma)?
            }
            KernelFamily::Polynomial => {
                KernelSpec::polynomial(r.degree.unwrap_or(3), r.offset.unwrap_or(T::one()))?
            }
            KernelFamily::Linear => KernelSpec::linear(),
        };
        spec.with_rescale(r.rescale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn central_diff(k: &KernelSpec<f64>, x: &[f64], u: &[f64], h: f64) -> Vec<f64> {
        (0..u.len())
            .map(|j| {
                let mut up = u.to_vec();
                let mut dn = u.to_vec();
                up[j] += h;
                dn[j] -= h;
                (k.eval(x, &up).unwrap() - k.eval(x, &dn).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn rbf_identity_and_closed_form() {
        let k = KernelSpec::rbf(1.0f64).unwrap();
        let x = [0.3, -0.7];
        assert_eq!(k.eval(&x, &x).unwrap(), 1.0);
        assert_eq!(KernelSpec::rbf_rescaled(1.0).unwrap().eval(&x, &x).unwrap(), 1.0);
        // exp(-1/2) to 17 digits
        let v = k.eval(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((v - 0.606_530_659_712_633_4).abs() < 1e-15);
    }

    #[test]
    fn rescale_maps_midpoint_to_zero() {
        // ||x-u||^2 = 2 σ² ln 2  gives raw value exactly 1/2
        let sigma = 1.3f64;
        let d = (2.0 * sigma * sigma * 2f64.ln()).sqrt();
        let k = KernelSpec::rbf_rescaled(sigma).unwrap();
        assert!(k.eval(&[0.0], &[d]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn polynomial_closed_form() {
        let k = KernelSpec::polynomial(3, 1.0).unwrap();
        assert_eq!(k.eval(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 8.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(KernelSpec::rbf(0.0).is_err());
        assert!(KernelSpec::rbf(-1.0).is_err());
        assert!(KernelSpec::<f64>::polynomial(0, 1.0).is_err());
        assert!(KernelSpec::polynomial(2, 1.0).unwrap().with_rescale(true).is_err());
        assert!(KernelSpec::<f64>::linear().with_rescale(true).is_err());
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let k = KernelSpec::rbf(1.0).unwrap();
        assert!(matches!(k.eval(&[1.0], &[1.0, 2.0]), Err(Error::Dimension { .. })));
        assert!(k.grad_u(&[1.0], &[1.0, 2.0]).is_err());
        let a = Array2::<f64>::zeros((2, 3));
        let b = Array2::<f64>::zeros((2, 2));
        assert!(k.gram(a.view(), b.view()).is_err());
    }

    #[test]
    fn rbf_gradient_vanishes_at_x() {
        let k = KernelSpec::rbf(0.7).unwrap();
        let x = [0.2, 1.5, -3.0];
        assert!(k.grad_u(&x, &x).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn rbf_gradient_sign_follows_x_minus_u() {
        let k = KernelSpec::rbf(1.0).unwrap();
        let (x, u) = ([1.0, 0.0], [0.0, 0.0]);
        let g = k.grad_u(&x, &u).unwrap();
        let fd = central_diff(&k, &x, &u, 1e-6);
        let err = ((g[0] - fd[0]).powi(2) + (g[1] - fd[1]).powi(2)).sqrt()
            / (fd[0].powi(2) + fd[1].powi(2)).sqrt();
        assert!(err < 1e-5, "rel err {err}");
        // moving u towards x increases similarity
        assert!(g[0] > 0.0);
    }

    #[test]
    fn linear_gradient_is_x() {
        let k = KernelSpec::polynomial(1, 0.0).unwrap();
        let x = [0.4, -2.0, 7.0];
        assert_eq!(k.grad_u(&x, &[3.0, 1.0, -1.0]).unwrap(), x.to_vec());
        assert_eq!(KernelSpec::linear().grad_u(&x, &[0.0; 3]).unwrap(), x.to_vec());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for family in 0..4 {
            for _ in 0..100 {
                let d = rng.gen_range(1..6);
                let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let sigma = rng.gen_range(0.5..3.0);
                let k = match family {
                    0 => KernelSpec::rbf(sigma).unwrap(),
                    1 => KernelSpec::rbf_rescaled(sigma).unwrap(),
                    2 => KernelSpec::polynomial(rng.gen_range(1..5), rng.gen_range(0.0..2.0)).unwrap(),
                    _ => KernelSpec::linear(),
                };
                let g = k.grad_u(&x, &u).unwrap();
                let fd = central_diff(&k, &x, &u, 1e-6);
                let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                assert!(diff / scale < 1e-5, "family {family}: {diff}");
            }
        }
    }

    #[test]
    fn symmetric_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // bandwidth large enough that 2k - 1 stays above -1 in floating point
        let raw = KernelSpec::rbf(1.5).unwrap();
        let resc = KernelSpec::rbf_rescaled(1.5).unwrap();
        let poly = KernelSpec::polynomial(3, 1.0).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for k in [&raw, &resc, &poly] {
                assert_eq!(k.eval(&x, &u).unwrap(), k.eval(&u, &x).unwrap());
            }
            let v = raw.eval(&x, &u).unwrap();
            assert!(v > 0.0 && v <= 1.0);
            let w = resc.eval(&x, &u).unwrap();
            assert!(w > -1.0 && w <= 1.0);
        }
    }

    #[test]
    fn gram_shapes_and_psd() {
        let k = KernelSpec::rbf(1.0).unwrap();
        let one = ndarray::array![[0.5, 0.5]];
        assert_eq!(k.gram(one.view(), one.view()).unwrap(), ndarray::array![[1.0]]);
        let empty = Array2::<f64>::zeros((0, 2));
        assert_eq!(k.gram(one.view(), empty.view()).unwrap().dim(), (1, 0));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [10usize, 50] {
            let x = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-2.0..2.0));
            let g = k.gram(x.view(), x.view()).unwrap();
            assert_eq!(g, g.t());
            let (vals, _) = symmetric_eigen(g.view()).unwrap();
            let top = vals[0];
            assert!(vals.iter().all(|&v| v >= -1e-10 && v >= -1e-8 * top));
        }
    }

    #[test]
    fn json_shape() {
        let k = KernelSpec::rbf_rescaled(1.5).unwrap();
        assert_eq!(
            serde_json::to_string(&k).unwrap(),
            r#"{"family":"rbf","sigma":1.5,"rescale":true}"#
        );
        let back: KernelSpec<f64> = serde_json::from_str(r#"{"family":"rbf","sigma":1.5,"rescale":true}"#).unwrap();
        assert_eq!(back, k);
        let p: KernelSpec<f64> = serde_json::from_str(r#"{"family":"poly","degree":2,"offset":0.5}"#).unwrap();
        assert_eq!(p, KernelSpec::polynomial(2, 0.5).unwrap());
        assert!(serde_json::from_str::<KernelSpec<f64>>(r#"{"family":"rbf","sigma":-1}"#).is_err());
        assert!(serde_json::from_str::<KernelSpec<f64>>(r#"{"family":"polynomial","degree":2,"rescale":true}"#).is_err());
    }
}

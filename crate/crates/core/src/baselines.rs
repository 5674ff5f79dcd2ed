//! Comparison methods: kernel ridge regression, Nyström features with
//! pluggable landmarks, k-means and a linear lasso.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{at_b, gram_t, matvec, solve_spd, symmetric_eigen};
use crate::scalar::{all_finite, sq_dist, Scalar};
use crate::sparseops::lasso_cd;

/// Jitter added to the landmark Gram matrix before whitening.
pub const NYSTROM_JITTER: f64 = 1e-10;
/// Eigenvalues below this fraction of the largest are dropped.
pub const NYSTROM_RANK_CUT: f64 = 1e-12;

/// Thresholds real scores at 0 into ±1 labels (ties to +1).
pub fn sign_labels<T: Scalar>(scores: ArrayView1<T>) -> Array1<T> {
    scores.mapv(|s| if s >= T::zero() { T::one() } else { -T::one() })
}

/// Kernel ridge regression with every training row as a basis vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KrrModel<T> {
    pub alpha: Array1<T>,
    pub x_train: Array2<T>,
    pub kernel: KernelSpec<T>,
    pub lambda: T,
}

/// Solves `(K + λI) α = y` with `K = k(X, X)`.
pub fn krr_fit<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>, kernel: KernelSpec<T>, lambda: T) -> Result<KrrModel<T>> {
    check_dim(x.nrows(), y.len())?;
    if x.nrows() == 0 {
        return Err(Error::Input("KRR needs at least one training row".into()));
    }
    if !(lambda > T::zero()) {
        return Err(Error::Input(format!("KRR lambda must be positive, got {lambda}")));
    }
    let mut k = kernel.gram(x, x)?;
    for i in 0..x.nrows() {
        k[[i, i]] += lambda;
    }
    let rhs = y.to_owned().insert_axis(Axis(1));
    let alpha = solve_spd(k.view(), rhs.view())?.column(0).to_owned();
    if !all_finite(alpha.as_slice().expect("contiguous")) {
        return Err(Error::Numerical("KRR solve produced non-finite coefficients".into()));
    }
    Ok(KrrModel { alpha, x_train: x.to_owned(), kernel, lambda })
}

impl<T: Scalar> KrrModel<T> {
    /// `k(x, X_train) · α`
    pub fn predict(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        let k = self.kernel.gram(x, self.x_train.view())?;
        matvec(k.view(), self.alpha.view())
    }
}

/// Explicit feature map `Φ = k(X, L) W` with `W Wᵀ ≈ K_LL⁻¹`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NystromMap<T> {
    pub landmarks: Array2<T>,
    pub kernel: KernelSpec<T>,
    /// m × m' with m' ≤ m after dropping near-null directions.
    pub whitener: Array2<T>,
}

impl<T: Scalar> NystromMap<T> {
    pub fn new(landmarks: Array2<T>, kernel: KernelSpec<T>) -> Result<Self> {
        let m = landmarks.nrows();
        if m == 0 {
            return Err(Error::Input("Nyström needs at least one landmark".into()));
        }
        let mut kmm = kernel.gram(landmarks.view(), landmarks.view())?;
        for i in 0..m {
            kmm[[i, i]] += T::lit(NYSTROM_JITTER);
        }
        let (vals, vecs) = symmetric_eigen(kmm.view())?;
        let top = vals[0];
        if !(top > T::zero()) {
            return Err(Error::Numerical("landmark Gram matrix has no positive eigenvalue".into()));
        }
        let keep: Vec<usize> = (0..m).filter(|&i| vals[i] >= T::lit(NYSTROM_RANK_CUT) * top).collect();
        let mut whitener = Array2::<T>::zeros((m, keep.len()));
        for (col, &i) in keep.iter().enumerate() {
            let s = T::one() / vals[i].sqrt();
            for r in 0..m {
                whitener[[r, col]] = vecs[[r, i]] * s;
            }
        }
        if !all_finite(whitener.as_slice().expect("contiguous")) {
            return Err(Error::Numerical("non-finite Nyström whitener".into()));
        }
        Ok(Self { landmarks, kernel, whitener })
    }

    pub fn dim(&self) -> usize {
        self.whitener.ncols()
    }
}

pub fn nystrom_features<T: Scalar>(map: &NystromMap<T>, x: ArrayView2<T>) -> Result<Array2<T>> {
    let k = map.kernel.gram(x, map.landmarks.view())?;
    crate::linalg::matmul(k.view(), map.whitener.view())
}

/// Ridge regression on Nyström features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NystromRidge<T> {
    pub map: NystromMap<T>,
    pub weights: Array1<T>,
}

impl<T: Scalar> NystromRidge<T> {
    /// `(ΦᵀΦ + λI) w = Φᵀ y`
    pub fn fit(map: NystromMap<T>, x: ArrayView2<T>, y: ArrayView1<T>, lambda: T) -> Result<Self> {
        check_dim(x.nrows(), y.len())?;
        if !(lambda > T::zero()) {
            return Err(Error::Input(format!("ridge lambda must be positive, got {lambda}")));
        }
        let phi = nystrom_features(&map, x)?;
        let mut a = gram_t(phi.view());
        for i in 0..a.nrows() {
            a[[i, i]] += lambda;
        }
        let b = at_b(phi.view(), y.insert_axis(Axis(1)));
        let weights = solve_spd(a.view(), b.view())?.column(0).to_owned();
        Ok(Self { map, weights })
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        let phi = nystrom_features(&self.map, x)?;
        matvec(phi.view(), self.weights.view())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans<T> {
    pub centroids: Array2<T>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub sse_trace: Vec<T>,
    pub iterations: usize,
}

fn nearest<T: Scalar>(row: &[T], centroids: &Array2<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, cen) in centroids.rows().into_iter().enumerate() {
        let dist = sq_dist(row, cen.as_slice().expect("standard layout"));
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

/// Lloyd's algorithm from `m` seeded distinct rows. A cluster that loses all
/// its points is moved onto the point farthest from its current centroid.
pub fn kmeans<T: Scalar>(x: ArrayView2<T>, m: usize, seed: u64, max_iter: usize) -> Result<KMeans<T>> {
    let (n, d) = x.dim();
    if m == 0 || m > n {
        return Err(Error::Input(format!("k-means needs 1 <= m <= n, got m={m}, n={n}")));
    }
    let x = x.as_standard_layout();
    let rows: Vec<&[T]> = x.rows().into_iter().map(|r| r.to_slice().expect("standard layout")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    for &i in &order {
        if chosen.len() == m {
            break;
        }
        if chosen.iter().all(|&j| rows[j] != rows[i]) {
            chosen.push(i);
        }
    }
    for &i in &order {
        if chosen.len() == m {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    let mut centroids = x.select(Axis(0), &chosen);
    let mut assignments = vec![usize::MAX; n];
    let mut sse_trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        let mut sse = T::zero();
        let mut dists = vec![T::zero(); n];
        for (i, row) in rows.iter().enumerate() {
            let (c, dist) = nearest(row, &centroids);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
            dists[i] = dist;
            sse += dist;
        }
        sse_trace.push(sse);
        if !changed && iterations > 1 {
            break;
        }
        let mut sums = Array2::<T>::zeros((m, d));
        let mut counts = vec![0usize; m];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for j in 0..d {
                sums[[c, j]] += rows[i][j];
            }
        }
        for c in 0..m {
            if counts[c] > 0 {
                let cnt = T::from_usize_lossy(counts[c]);
                for j in 0..d {
                    centroids[[c, j]] = sums[[c, j]] / cnt;
                }
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].partial_cmp(&dists[b]).expect("finite distances"))
                    .expect("n >= 1");
                centroids.row_mut(c).assign(&x.row(far));
                dists[far] = T::zero();
            }
        }
    }
    Ok(KMeans { centroids, assignments, sse_trace, iterations })
}

/// Linear model fitted by lasso on the raw features plus a constant column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearLasso<T> {
    pub coef: Array1<T>,
    pub intercept: T,
}

impl<T: Scalar> LinearLasso<T> {
    pub fn fit(x: ArrayView2<T>, y: ArrayView1<T>, lambda: T, tol: T, max_iter: usize) -> Result<Self> {
        check_dim(x.nrows(), y.len())?;
        let mut a = x.to_owned();
        a.push_column(Array1::ones(x.nrows()).view()).expect("row count matches");
        let fit = lasso_cd(a.view(), y, lambda, tol, max_iter)?;
        let d = x.ncols();
        Ok(Self { coef: fit.coef.slice(ndarray::s![..d]).to_owned(), intercept: fit.coef[d] })
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        Ok(matvec(x, self.coef.view())? + self.intercept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn krr_one_point() {
        let m: KrrModel<f64> = krr_fit(array![[0.3, -1.0]].view(), array![1.0].view(), KernelSpec::rbf(1.0).unwrap(), 1.0).unwrap();
        assert!((m.alpha[0] - 0.5).abs() < 1e-15);
        assert!((m.predict(array![[0.3, -1.0]].view()).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn krr_interpolates_and_null_target() {
        let x = random(10, 2, 1) * 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = Array1::from_shape_fn(10, |_| rng.gen_range(-1.0..1.0));
        let k = KernelSpec::rbf(1.0).unwrap();
        let m = krr_fit(x.view(), y.view(), k, 1e-10).unwrap();
        let p = m.predict(x.view()).unwrap();
        assert!((&p - &y).iter().all(|r| r.abs() < 1e-6));
        let z = krr_fit(x.view(), Array1::zeros(10).view(), k, 0.1).unwrap();
        assert!(z.alpha.iter().all(|a| *a == 0.0));
        assert!(krr_fit(x.view(), y.view(), k, 0.0).is_err());
    }

    #[test]
    fn nystrom_full_rank_recovers_gram() {
        let x = random(12, 3, 3);
        let k = KernelSpec::rbf(1.5).unwrap();
        let map = NystromMap::new(x.clone(), k).unwrap();
        let phi = nystrom_features(&map, x.view()).unwrap();
        let approx = phi.dot(&phi.t());
        let exact = k.gram(x.view(), x.view()).unwrap();
        assert!((&approx - &exact).iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn nystrom_single_landmark() {
        let x = random(5, 2, 4);
        let z = array![[0.5, -0.25]];
        let k = KernelSpec::polynomial(2, 1.0).unwrap();
        let map = NystromMap::new(z.clone(), k).unwrap();
        let phi = nystrom_features(&map, x.view()).unwrap();
        let kzz = k.eval(&[0.5, -0.25], &[0.5, -0.25]).unwrap();
        for i in 0..5 {
            let want = k.eval(x.row(i).as_slice().unwrap(), &[0.5, -0.25]).unwrap() / kzz.sqrt();
            assert!((phi[[i, 0]].abs() - want.abs()).abs() < 1e-9 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn nystrom_error_shrinks_with_nested_landmarks() {
        let x = random(30, 2, 5);
        let k = KernelSpec::rbf(1.0).unwrap();
        let exact = k.gram(x.view(), x.view()).unwrap();
        let mut prev = f64::INFINITY;
        for m in [1, 2, 4, 8, 16, 30] {
            let map = NystromMap::new(x.slice(ndarray::s![..m, ..]).to_owned(), k).unwrap();
            let phi = nystrom_features(&map, x.view()).unwrap();
            let err = (&phi.dot(&phi.t()) - &exact).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err <= prev + 1e-9, "m={m}: {err} > {prev}");
            prev = err;
        }
    }

    #[test]
    fn nystrom_duplicate_landmarks_stay_finite() {
        let z: Array2<f64> = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let k = KernelSpec::rbf(1.0).unwrap();
        let map = NystromMap::new(z.clone(), k).unwrap();
        assert!(map.whitener.iter().all(|v| v.is_finite()));
        let phi = nystrom_features(&map, z.view()).unwrap();
        let exact = k.gram(z.view(), z.view()).unwrap();
        assert!((&phi.dot(&phi.t()) - &exact).iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn nystrom_drops_null_directions() {
        // polynomial Gram of collinear landmarks has exact zero eigenvalues
        // far below the cut relative to its large top eigenvalue
        let z: Array2<f64> = array![[10.0], [20.0], [30.0], [40.0]];
        let map = NystromMap::new(z, KernelSpec::linear()).unwrap();
        assert_eq!(map.dim(), 1);
    }

    #[test]
    fn kmeans_single_cluster_is_mean() {
        let x = random(20, 3, 6);
        let km = kmeans(x.view(), 1, 0, 10).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        assert!((&km.centroids.row(0) - &mean).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn kmeans_on_distinct_points() {
        let x = array![[0.0, 0.0], [5.0, 5.0], [-3.0, 2.0], [7.0, -1.0]];
        let km = kmeans(x.view(), 4, 9, 10).unwrap();
        let mut got: Vec<Vec<f64>> = km.centroids.rows().into_iter().map(|r| r.to_vec()).collect();
        let mut want: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
        assert_eq!(*km.sse_trace.last().unwrap(), 0.0);
    }

    #[test]
    fn kmeans_sse_monotone() {
        for seed in 0..10 {
            let x = random(50, 3, 100 + seed);
            let km = kmeans(x.view(), 5, seed, 100).unwrap();
            for w in km.sse_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            assert!(km.iterations <= 100);
            assert_eq!(km, kmeans(x.view(), 5, seed, 100).unwrap());
        }
        assert!(kmeans(random(3, 2, 0).view(), 4, 0, 10).is_err());
    }

    #[test]
    fn kmeans_with_duplicate_rows() {
        let x = array![[1.0], [1.0], [1.0], [2.0]];
        let km = kmeans(x.view(), 3, 0, 20).unwrap();
        assert_eq!(km.centroids.nrows(), 3);
        assert_eq!(*km.sse_trace.last().unwrap(), 0.0);
    }

    #[test]
    fn linear_lasso_recovers_line() {
        let x = random(40, 2, 7);
        let y = x.column(0).mapv(|v| 3.0 * v + 1.0);
        let m = LinearLasso::fit(x.view(), y.view(), 0.0, 1e-12, 10_000).unwrap();
        assert!((m.coef[0] - 3.0).abs() < 1e-6 && m.coef[1].abs() < 1e-6 && (m.intercept - 1.0).abs() < 1e-6);
        let p = m.predict(x.view()).unwrap();
        assert!((&p - &y).iter().all(|r| r.abs() < 1e-6));
    }
}

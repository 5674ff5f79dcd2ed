use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::LossSpec;
use crate::scalar::Scalar;

use super::config::Task;

/// Basis vectors living in one input view, with the kernel used to compare
/// them against that view's data.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisBlock<T> {
    pub kernel: KernelSpec<T>,
    /// R×d, one basis vector per row.
    pub basis: Array2<T>,
}

impl<T: Scalar> BasisBlock<T> {
    pub fn new(kernel: KernelSpec<T>, basis: Array2<T>) -> Self {
        Self { kernel, basis: basis.as_standard_layout().into_owned() }
    }

    pub fn r(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// `f(x) = Σ_j k_j(x^j, U_j) C_j`: learned basis vectors per view plus the
/// weight matrix over all of them (one column per output).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr<T>", into = "ModelRepr<T>", bound = "T: Scalar")]
pub struct SpkmModel<T> {
    task: Task,
    loss: LossSpec,
    blocks: Vec<BasisBlock<T>>,
    /// (Σ R_j) × outputs.
    coef: Array2<T>,
}

impl<T: Scalar> SpkmModel<T> {
    pub fn new(task: Task, loss: LossSpec, blocks: Vec<BasisBlock<T>>, coef: Array2<T>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Input("model needs at least one basis block".into()));
        }
        let r: usize = blocks.iter().map(BasisBlock::r).sum();
        if r < 1 {
            return Err(Error::Input("model needs at least one basis vector".into()));
        }
        check_dim(r, coef.nrows())?;
        match task {
            Task::Multiclass if coef.ncols() < 2 => {
                return Err(Error::Input("multiclass model needs at least two weight columns".into()))
            }
            Task::Binary | Task::Regression if coef.ncols() != 1 => {
                return Err(Error::Input("binary/regression model has exactly one weight column".into()))
            }
            _ => {}
        }
        let finite = coef.iter().all(|v| v.is_finite())
            && blocks.iter().all(|b| b.basis.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Numerical("model contains non-finite entries".into()));
        }
        Ok(Self { task, loss, blocks, coef: coef.as_standard_layout().into_owned() })
    }

    /// Single-view model with a weight vector.
    pub fn single(task: Task, loss: LossSpec, kernel: KernelSpec<T>, basis: Array2<T>, c: Array1<T>) -> Result<Self> {
        let n = c.len();
        let coef = c.into_shape_with_order((n, 1)).expect("vector reshapes to column");
        Self::new(task, loss, vec![BasisBlock::new(kernel, basis)], coef)
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn loss(&self) -> LossSpec {
        self.loss
    }

    pub fn blocks(&self) -> &[BasisBlock<T>] {
        &self.blocks
    }

    pub fn coef(&self) -> &Array2<T> {
        &self.coef
    }

    /// Total number of basis vectors across views.
    pub fn r(&self) -> usize {
        self.coef.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.coef.ncols()
    }

    /// Basis matrix of a single-view model.
    pub fn basis(&self) -> &Array2<T> {
        &self.blocks[0].basis
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.blocks[0].kernel
    }

    /// Weight column of a single-output model.
    pub fn weights(&self) -> Array1<T> {
        self.coef.column(0).to_owned()
    }

    /// Copy with the weight matrix replaced, basis untouched.
    pub fn with_coef(&self, coef: Array2<T>) -> Result<Self> {
        Self::new(self.task, self.loss, self.blocks.clone(), coef)
    }

    /// Copy with the basis blocks replaced.
    pub fn with_blocks(&self, blocks: Vec<BasisBlock<T>>) -> Result<Self> {
        Self::new(self.task, self.loss, blocks, self.coef.clone())
    }

    /// Rows `r0..r0+R_j` of the weight matrix that belong to block `j`.
    pub fn block_coef_range(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.blocks[..j].iter().map(BasisBlock::r).sum();
        start..start + self.blocks[j].r()
    }

    /// Fraction of basis-vector coordinates that are not exactly zero.
    pub fn u_nnz_fraction(&self) -> f64 {
        let (nnz, total) = self.blocks.iter().fold((0usize, 0usize), |(nz, tot), b| {
            (nz + b.basis.iter().filter(|v| **v != T::zero()).count(), tot + b.basis.len())
        });
        if total == 0 {
            0.0
        } else {
            nnz as f64 / total as f64
        }
    }

    /// Number of weights that are not exactly zero.
    pub fn c_nnz(&self) -> usize {
        self.coef.iter().filter(|v| **v != T::zero()).count()
    }

    /// Kernel features `[k_1(X_1, U_1) | k_2(X_2, U_2) | …]`, m × Σ R_j.
    pub fn features(&self, views: &[ArrayView2<T>]) -> Result<Array2<T>> {
        check_dim(self.blocks.len(), views.len())?;
        let m = views[0].nrows();
        let mut out = Array2::<T>::zeros((m, self.r()));
        let mut col = 0;
        for (block, x) in self.blocks.iter().zip(views) {
            check_dim(m, x.nrows())?;
            check_dim(block.dim(), x.ncols())?;
            let g = block.kernel.gram(x.view(), block.basis.view())?;
            out.slice_mut(ndarray::s![.., col..col + block.r()]).assign(&g);
            col += block.r();
        }
        Ok(out)
    }

    /// Raw scores `k(X, U) C` (m × outputs) for a model with one view per
    /// entry of `views`.
    pub fn predict_views(&self, views: &[ArrayView2<T>]) -> Result<Array2<T>> {
        let k = self.features(views)?;
        crate::linalg::matmul(k.view(), self.coef.view())
    }

    /// Raw scores for a single-view model.
    pub fn predict(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.predict_views(&[x])
    }

    /// Score vector of a single-output, single-view model.
    pub fn predict_scores(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        if self.outputs() != 1 {
            return Err(Error::Input("predict_scores needs a single-output model".into()));
        }
        Ok(self.predict(x)?.column(0).to_owned())
    }

    /// Task-specific decision from raw scores: sign (ties to +1) for binary,
    /// identity for regression, argmax column index for multiclass.
    pub fn decide(&self, scores: ArrayView2<T>) -> Array1<T> {
        decide(self.task, scores)
    }
}

pub fn decide<T: Scalar>(task: Task, scores: ArrayView2<T>) -> Array1<T> {
    match task {
        Task::Binary => scores.column(0).mapv(|s| if s >= T::zero() { T::one() } else { -T::one() }),
        Task::Regression => scores.column(0).to_owned(),
        Task::Multiclass => scores
            .axis_iter(Axis(0))
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                T::from_usize_lossy(best)
            })
            .collect(),
    }
}

fn rows_of<T: Scalar>(a: &Array2<T>) -> Vec<Vec<T>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows<T: Scalar>(rows: Vec<Vec<T>>, ncols: Option<usize>) -> Result<Array2<T>> {
    let d = match rows.first() {
        Some(r) => r.len(),
        None => ncols.unwrap_or(0),
    };
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * d);
    for (i, r) in rows.into_iter().enumerate() {
        if r.len() != d {
            return Err(Error::Parse { row: i, col: r.len(), msg: format!("ragged matrix row, expected {d} entries") });
        }
        flat.extend(r);
    }
    Array2::from_shape_vec((n, d), flat).map_err(|e| Error::Input(e.to_string()))
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ViewRepr<T> {
    kernel: KernelSpec<T>,
    dim: usize,
    #[serde(rename = "U")]
    u: Vec<Vec<T>>,
    c: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelRepr<T> {
    task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<KernelSpec<T>>,
    loss: LossSpec,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    u: Option<Vec<Vec<T>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<T>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    cmat: Option<Vec<Vec<T>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    views: Option<Vec<ViewRepr<T>>>,
}

impl<T: Scalar> From<SpkmModel<T>> for ModelRepr<T> {
    fn from(m: SpkmModel<T>) -> Self {
        if m.blocks.len() == 1 {
            let b = &m.blocks[0];
            let (c, cmat) = if m.task == Task::Multiclass {
                (None, Some(rows_of(&m.coef)))
            } else {
                (Some(m.coef.column(0).to_vec()), None)
            };
            ModelRepr {
                task: m.task,
                kernel: Some(b.kernel),
                loss: m.loss,
                u: Some(rows_of(&b.basis)),
                c,
                cmat,
                views: None,
            }
        } else {
            let views = (0..m.blocks.len())
                .map(|j| {
                    let b = &m.blocks[j];
                    ViewRepr {
                        kernel: b.kernel,
                        dim: b.dim(),
                        u: rows_of(&b.basis),
                        c: m.coef.column(0).slice(ndarray::s![m.block_coef_range(j)]).to_vec(),
                    }
                })
                .collect();
            ModelRepr { task: m.task, kernel: None, loss: m.loss, u: None, c: None, cmat: None, views: Some(views) }
        }
    }
}

impl<T: Scalar> TryFrom<ModelRepr<T>> for SpkmModel<T> {
    type Error = Error;

    fn try_from(r: ModelRepr<T>) -> Result<Self> {
        if let Some(views) = r.views {
            let mut blocks = Vec::with_capacity(views.len());
            let mut c = Vec::new();
            for v in views {
                if v.u.len() != v.c.len() {
                    return Err(Error::Input("view weight count differs from its basis count".into()));
                }
                blocks.push(BasisBlock::new(v.kernel, from_rows(v.u, Some(v.dim))?));
                c.extend(v.c);
            }
            let n = c.len();
            let coef = Array2::from_shape_vec((n, 1), c).map_err(|e| Error::Input(e.to_string()))?;
            return SpkmModel::new(r.task, r.loss, blocks, coef);
        }
        let kernel = r.kernel.ok_or_else(|| Error::Input("model JSON missing \"kernel\"".into()))?;
        let basis = from_rows(r.u.ok_or_else(|| Error::Input("model JSON missing \"U\"".into()))?, None)?;
        let coef = match (r.c, r.cmat) {
            (Some(c), None) => {
                let n = c.len();
                Array2::from_shape_vec((n, 1), c).map_err(|e| Error::Input(e.to_string()))?
            }
            (None, Some(cm)) => from_rows(cm, None)?,
            _ => return Err(Error::Input("model JSON needs exactly one of \"c\" or \"C\"".into())),
        };
        SpkmModel::new(r.task, r.loss, vec![BasisBlock::new(kernel, basis)], coef)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rbf() -> KernelSpec<f64> {
        KernelSpec::rbf(1.0).unwrap()
    }

    #[test]
    fn self_similarity_score() {
        let u = array![[0.4, -1.2]];
        let m = SpkmModel::single(Task::Binary, LossSpec::Cosine, rbf(), u.clone(), array![1.0]).unwrap();
        assert_eq!(m.predict_scores(u.view()).unwrap(), array![1.0]);
    }

    #[test]
    fn null_model_scores_zero() {
        let m = SpkmModel::single(Task::Regression, LossSpec::Squared, rbf(), array![[0.0], [1.0]], array![0.0, 0.0])
            .unwrap();
        let s = m.predict_scores(array![[0.3], [5.0], [-2.0]].view()).unwrap();
        assert!(s.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn predict_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = rbf();
        let u = Array2::from_shape_fn((2, 3), |_| rng.gen_range(-1.0..1.0));
        let c = array![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let x = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-1.0..1.0));
        let m = SpkmModel::single(Task::Regression, LossSpec::Squared, k, u.clone(), c.clone()).unwrap();
        let got = m.predict_scores(x.view()).unwrap();
        for i in 0..5 {
            let mut s = 0.0;
            for r in 0..2 {
                let d2: f64 = (0..3).map(|j| (x[[i, j]] - u[[r, j]]).powi(2)).sum();
                s += (-d2 / 2.0).exp() * c[r];
            }
            assert!((got[i] - s).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_in_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = Array2::from_shape_fn((3, 2), |_| rng.gen_range(-1.0..1.0));
        let x = Array2::from_shape_fn((6, 2), |_| rng.gen_range(-1.0..1.0));
        let c1 = Array1::from_shape_fn(3, |_| rng.gen_range(-1.0..1.0));
        let c2 = Array1::from_shape_fn(3, |_| rng.gen_range(-1.0..1.0));
        let mk = |c: Array1<f64>| {
            SpkmModel::single(Task::Regression, LossSpec::Squared, rbf(), u.clone(), c).unwrap()
        };
        let p1 = mk(c1.clone()).predict_scores(x.view()).unwrap();
        let p2 = mk(c2.clone()).predict_scores(x.view()).unwrap();
        let p12 = mk(&c1 + &c2).predict_scores(x.view()).unwrap();
        for i in 0..6 {
            assert!((p12[i] - p1[i] - p2[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = SpkmModel::single(Task::Binary, LossSpec::Cosine, rbf(), array![[0.0, 1.0]], array![1.0]).unwrap();
        assert!(m.predict(array![[1.0, 2.0, 3.0]].view()).is_err());
    }

    #[test]
    fn invalid_models_rejected() {
        let k = rbf();
        assert!(SpkmModel::single(Task::Binary, LossSpec::Cosine, k, array![[0.0], [1.0]], array![1.0]).is_err());
        assert!(SpkmModel::single(Task::Binary, LossSpec::Cosine, k, array![[f64::NAN]], array![1.0]).is_err());
        let blocks = vec![BasisBlock::new(k, array![[0.0]])];
        assert!(SpkmModel::new(Task::Multiclass, LossSpec::Squared, blocks, array![[1.0]]).is_err());
    }

    #[test]
    fn multiclass_argmax_of_mirrored_columns_is_sign() {
        let scores = array![[0.3, -0.3], [-2.0, 2.0], [0.0, -0.0]];
        let d = decide(Task::Multiclass, scores.view());
        let b = decide(Task::Binary, scores.slice(ndarray::s![.., 0..1]));
        // class 0 <-> +1, class 1 <-> -1
        for (m, s) in d.iter().zip(b.iter()) {
            assert_eq!(*m == 0.0, *s == 1.0);
        }
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = Array2::from_shape_fn((2, 3), |_| rng.gen::<f64>() * 1e3 - 1e-7);
        let c = array![std::f64::consts::PI, -1.0 / 3.0];
        let m = SpkmModel::single(Task::Binary, LossSpec::Cosine, KernelSpec::rbf_rescaled(0.7).unwrap(), u, c).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.starts_with(r#"{"task":"binary","kernel":{"family":"rbf","sigma":0.7,"rescale":true},"loss":"cosine","U":[["#));
        let back: SpkmModel<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);

        let blocks = vec![BasisBlock::new(rbf(), array![[1.0]]), BasisBlock::new(rbf(), array![[1.0, 2.0], [3.0, 4.0]])];
        let mkl = SpkmModel::new(Task::Binary, LossSpec::Squared, blocks, array![[0.5], [0.25], [-0.125]]).unwrap();
        let back: SpkmModel<f64> = serde_json::from_str(&serde_json::to_string(&mkl).unwrap()).unwrap();
        assert_eq!(back, mkl);

        let mc = SpkmModel::new(
            Task::Multiclass,
            LossSpec::Squared,
            vec![BasisBlock::new(rbf(), array![[1.0], [2.0]])],
            array![[1.0, -1.0, 0.5], [0.0, 2.0, -3.0]],
        )
        .unwrap();
        let s = serde_json::to_string(&mc).unwrap();
        assert!(s.contains(r#""C":[[1.0,-1.0,0.5],[0.0,2.0,-3.0]]"#));
        assert_eq!(serde_json::from_str::<SpkmModel<f64>>(&s).unwrap(), mc);
    }
}

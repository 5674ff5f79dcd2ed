//! The training objective `L(k(X,U)C, Y) + λ·pen(C)` and its gradients.
//!
//! Kernel values are recomputed on the fly from the current basis; the
//! largest buffers held are the n×R feature matrix and the per-output
//! prediction and loss-gradient vectors.

use ndarray::{Array2, ArrayView2, CowArray, Ix2};

use crate::error::{check_dim, Error, Result};
use crate::losses::LossSpec;
use crate::scalar::Scalar;

use super::config::{CNorm, Penalty};
use super::model::{BasisBlock, SpkmModel};

/// Data, targets and loss for one training problem.
pub struct Objective<'a, T: Scalar> {
    views: Vec<CowArray<'a, T, Ix2>>,
    /// One vector of length n per output column.
    targets: Vec<Vec<T>>,
    loss: LossSpec,
    penalty: Penalty<T>,
}

/// Objective value with its gradients with respect to every basis block and
/// the weight matrix.
#[derive(Clone, Debug)]
pub struct ObjectiveGrad<T> {
    pub value: T,
    pub basis: Vec<Array2<T>>,
    pub coef: Array2<T>,
}

pub(crate) struct Evaluation<T> {
    pub features: Array2<T>,
    pub preds: Vec<Vec<T>>,
    pub loss: T,
}

impl<'a, T: Scalar> Objective<'a, T> {
    /// `targets` is n × outputs.
    pub fn new(
        views: &[ArrayView2<'a, T>],
        targets: ArrayView2<T>,
        loss: LossSpec,
        penalty: Penalty<T>,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Input("objective needs at least one view".into()));
        }
        let n = targets.nrows();
        if n == 0 {
            return Err(Error::Input("objective needs at least one sample".into()));
        }
        for v in views {
            check_dim(n, v.nrows())?;
        }
        let views = views
            .iter()
            .map(|v| {
                if v.is_standard_layout() {
                    CowArray::from(*v)
                } else {
                    CowArray::from(v.as_standard_layout().into_owned())
                }
            })
            .collect();
        let targets = targets.columns().into_iter().map(|c| c.to_vec()).collect();
        Ok(Self { views, targets, loss, penalty })
    }

    pub fn n(&self) -> usize {
        self.targets[0].len()
    }

    pub fn outputs(&self) -> usize {
        self.targets.len()
    }

    pub fn loss(&self) -> LossSpec {
        self.loss
    }

    pub fn penalty(&self) -> Penalty<T> {
        self.penalty
    }

    pub(crate) fn view(&self, j: usize) -> ArrayView2<'_, T> {
        self.views[j].view()
    }

    pub(crate) fn targets(&self) -> &[Vec<T>] {
        &self.targets
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    fn check_shapes(&self, blocks: &[BasisBlock<T>], coef: &Array2<T>) -> Result<()> {
        check_dim(self.views.len(), blocks.len())?;
        for (b, x) in blocks.iter().zip(&self.views) {
            check_dim(x.ncols(), b.dim())?;
        }
        check_dim(blocks.iter().map(BasisBlock::r).sum(), coef.nrows())?;
        check_dim(self.outputs(), coef.ncols())
    }

    pub(crate) fn features(&self, blocks: &[BasisBlock<T>]) -> Array2<T> {
        let n = self.n();
        let r: usize = blocks.iter().map(BasisBlock::r).sum();
        let mut k = Array2::<T>::zeros((n, r));
        let mut offset = 0;
        for (block, x) in blocks.iter().zip(&self.views) {
            let basis = block.basis.as_slice().expect("standard layout");
            let d = block.dim();
            for (i, xi) in x.rows().into_iter().enumerate() {
                let xi = xi.to_slice().expect("standard layout");
                for r in 0..block.r() {
                    k[[i, offset + r]] = block.kernel.eval_unchecked(xi, &basis[r * d..(r + 1) * d]);
                }
            }
            offset += block.r();
        }
        k
    }

    pub(crate) fn predictions(features: &Array2<T>, coef: &Array2<T>) -> Vec<Vec<T>> {
        let (n, r) = features.dim();
        let mut preds = vec![vec![T::zero(); n]; coef.ncols()];
        for (i, row) in features.rows().into_iter().enumerate() {
            for (col, p) in preds.iter_mut().enumerate() {
                let mut s = T::zero();
                for q in 0..r {
                    s += row[q] * coef[[q, col]];
                }
                p[i] = s;
            }
        }
        preds
    }

    pub(crate) fn loss_of(&self, preds: &[Vec<T>]) -> Result<T> {
        let mut total = T::zero();
        for (p, y) in preds.iter().zip(&self.targets) {
            total += self.loss.value(p, y)?;
        }
        Ok(total)
    }

    pub(crate) fn evaluate(&self, blocks: &[BasisBlock<T>], coef: &Array2<T>) -> Result<Evaluation<T>> {
        let features = self.features(blocks);
        let preds = Self::predictions(&features, coef);
        let loss = self.loss_of(&preds)?;
        Ok(Evaluation { features, preds, loss })
    }

    /// Loss plus weight penalty.
    pub(crate) fn value_parts(&self, blocks: &[BasisBlock<T>], coef: &Array2<T>) -> Result<T> {
        Ok(self.evaluate(blocks, coef)?.loss + self.penalty.value(coef.iter()))
    }

    pub fn value(&self, model: &SpkmModel<T>) -> Result<T> {
        self.check_shapes(model.blocks(), model.coef())?;
        self.value_parts(model.blocks(), model.coef())
    }

    /// `∂L/∂ŷ` per output column.
    pub(crate) fn loss_grads(&self, preds: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        preds
            .iter()
            .zip(&self.targets)
            .map(|(p, y)| self.loss.grad(p, y))
            .collect()
    }

    /// Gradient of the loss with respect to every basis vector:
    /// `∇u_r = Σ_i w_ir ∇_u k(x_i, u_r)` with `w_ir = Σ_col G[col][i] C[r, col]`.
    pub(crate) fn basis_gradient(
        &self,
        blocks: &[BasisBlock<T>],
        coef: &Array2<T>,
        loss_grads: &[Vec<T>],
    ) -> Vec<Array2<T>> {
        let mut grads = Vec::with_capacity(blocks.len());
        let mut offset = 0;
        let mut acc_b = Vec::new();
        let mut w = Vec::new();
        for (block, x) in blocks.iter().zip(&self.views) {
            let (r, d) = (block.r(), block.dim());
            let basis = block.basis.as_slice().expect("standard layout");
            let mut g = Array2::<T>::zeros((r, d));
            acc_b.clear();
            acc_b.resize(r, T::zero());
            {
                let gs = g.as_slice_mut().expect("standard layout");
                for (i, xi) in x.rows().into_iter().enumerate() {
                    let xi = xi.to_slice().expect("standard layout");
                    w.clear();
                    w.extend((0..r).map(|q| {
                        let mut s = T::zero();
                        for (col, lg) in loss_grads.iter().enumerate() {
                            s += lg[i] * coef[[offset + q, col]];
                        }
                        s
                    }));
                    for q in 0..r {
                        if w[q] == T::zero() {
                            continue;
                        }
                        let uq = &basis[q * d..(q + 1) * d];
                        let (_, a, b) = block.kernel.value_and_grad_coeffs(xi, uq);
                        let wa = w[q] * a;
                        for (gj, &xj) in gs[q * d..(q + 1) * d].iter_mut().zip(xi) {
                            *gj += wa * xj;
                        }
                        acc_b[q] += w[q] * b;
                    }
                }
                for q in 0..r {
                    if acc_b[q] != T::zero() {
                        for (gj, &uj) in gs[q * d..(q + 1) * d].iter_mut().zip(&basis[q * d..(q + 1) * d]) {
                            *gj += acc_b[q] * uj;
                        }
                    }
                }
            }
            grads.push(g);
            offset += r;
        }
        grads
    }

    /// `Kᵀ G`: gradient of the loss with respect to the weights.
    pub(crate) fn coef_gradient(features: &Array2<T>, loss_grads: &[Vec<T>]) -> Array2<T> {
        let (n, r) = features.dim();
        let mut g = Array2::<T>::zeros((r, loss_grads.len()));
        for (col, lg) in loss_grads.iter().enumerate() {
            for q in 0..r {
                let mut s = T::zero();
                for i in 0..n {
                    s += features[[i, q]] * lg[i];
                }
                g[[q, col]] = s;
            }
        }
        g
    }

    /// Full objective and gradients. For the l1 penalty the gradient uses
    /// `sign(c)` with zero at `c = 0`.
    pub fn gradient(&self, model: &SpkmModel<T>) -> Result<ObjectiveGrad<T>> {
        let (blocks, coef) = (model.blocks(), model.coef());
        self.check_shapes(blocks, coef)?;
        let eval = self.evaluate(blocks, coef)?;
        let lg = self.loss_grads(&eval.preds)?;
        let basis = self.basis_gradient(blocks, coef, &lg);
        let mut cg = Self::coef_gradient(&eval.features, &lg);
        let lambda = self.penalty.lambda;
        if lambda != T::zero() {
            for (g, &c) in cg.iter_mut().zip(coef.iter()) {
                *g += match self.penalty.norm {
                    CNorm::L1 => {
                        if c == T::zero() {
                            T::zero()
                        } else {
                            lambda * c.signum()
                        }
                    }
                    CNorm::L2 => T::two() * lambda * c,
                };
            }
        }
        Ok(ObjectiveGrad { value: eval.loss + self.penalty.value(coef.iter()), basis, coef: cg })
    }
}

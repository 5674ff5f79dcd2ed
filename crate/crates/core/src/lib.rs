//! Sparse pre-image kernel machines.
//!
//! A kernel model whose decision function depends on a handful of learned
//! input-space basis vectors instead of the training set, together with the
//! pieces needed to train and evaluate it: differentiable kernels and
//! losses, l1-ball projection and lasso, kernel ridge regression and
//! Nyström baselines, a Rademacher-complexity bound check, and dataset
//! utilities.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below name the common `f64` instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod losses;
pub mod scalar;
pub mod sparseops;
pub mod spkm;
pub mod theory;

pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec};
pub use losses::LossSpec;
pub use scalar::Scalar;
pub use sparseops::L1Ball;
pub use spkm::{CNorm, FitReport, SpkmModel, Task, TrainConfig};

pub type SpkmModel64 = SpkmModel<f64>;
pub type SpkmModel32 = SpkmModel<f32>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type TrainConfig64 = TrainConfig<f64>;

pub type Dataset64 = data::Dataset<f64>;

//! Sparse pre-image kernel machine.
//!
//! The model is `f(x) = k(x, U) c`: a small set of basis vectors `U` that
//! live in input space, compared to the data through a kernel, and a weight
//! vector `c`. Training alternates between
//!
//! 1. projected gradient descent on `U` with `c` fixed, optionally projecting
//!    every basis vector onto an l1 ball to make it sparse, and
//! 2. a regularized solve for `c` with `U` fixed (ridge, lasso, or proximal
//!    gradient for the cosine loss),
//!
//! repeated from several random starts, keeping the best. Kernel values are
//! evaluated on the fly so memory stays `O(nR)`, and one gradient evaluation
//! costs `O(dnR)`.
//!
//! Multiclass models share `U` across classes and learn one weight column
//! per class; multi-view models give every view its own basis block and
//! solve the weights jointly.

mod config;
mod fit;
mod model;
mod objective;
mod steps;

pub use config::{CNorm, Penalty, Task, TrainConfig};
pub use fit::{argmax_rows, fit, fit_mkl, fit_multiclass, one_hot_pm1, FitReport, PhaseSeconds, View};
pub use model::{decide, BasisBlock, SpkmModel};
pub use objective::{Objective, ObjectiveGrad};
pub use steps::{c_step, c_step_with, u_step, u_step_with};

//! Low-rank matrix completion where the completed matrix must also explain
//! a fully observed side-information matrix through a linear map.
//!
//! The estimator minimizes, over `X` of rank at most `k`,
//!
//! ```text
//! Σ_{(i,j)∈Ω} (X_ij − A_ij)² + λ min_α ‖Y − Xα‖_F² + γ‖X‖_*
//! ```
//!
//! [`admm`] solves it by splitting `X = UVᵀ` and lifting the rank constraint
//! to a projection matrix `P`; the `P` step is an eigenproblem handled
//! through an implicit operator so no `n×n` matrix is ever formed.
//! [`baselines`] holds Iterative-SVD, Soft-Impute and ScaledGD for
//! comparison, and [`bench`] runs parameter sweeps into CSV files.
//!
//! ```
//! use sidelrm::{admm, generate_synthetic, objective, Hyperparams};
//!
//! let (data, y, truth) = generate_synthetic::<f64>(60, 30, 2, 4, 0.5, 0.1, 7).unwrap();
//! let mut hp = Hyperparams::new(2);
//! hp.threads = 1;
//! let (state, report) = admm::solve(&data, &y, &hp).unwrap();
//! let err = objective::err_l2(&state.estimate(), &truth.a_true).unwrap();
//! assert_eq!(report.iterations, hp.max_iters);
//! assert!(err < 0.1);
//! ```
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the precision.

// `!(x > 0)` also rejects NaN, which is the point of those checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod baselines;
pub mod bench;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use model::{generate_synthetic, GroundTruth, Hyperparams, PartialMatrix, SideInfo};
pub use objective::{Estimate, Metrics};
pub use scalar::Real;

/// Double-precision dense matrix.
pub type Matrix = linalg::Mat<f64>;
/// Single-precision dense matrix.
pub type MatrixF32 = linalg::Mat<f32>;
pub type Observations = model::PartialMatrix<f64>;
pub type ObservationsF32 = model::PartialMatrix<f32>;
pub type Side = model::SideInfo<f64>;
pub type SideF32 = model::SideInfo<f32>;
pub type Params = model::Hyperparams<f64>;
pub type ParamsF32 = model::Hyperparams<f32>;
pub type State = admm::IterateState<f64>;
pub type StateF32 = admm::IterateState<f32>;

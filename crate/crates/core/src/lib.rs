//! Adaptive stochastic ADMM for equality-constrained composite objectives.
//!
//! The crate solves problems of the form
//!
//! ```text
//! min_{w, v}  E[l(w, xi)] + phi(v)   s.t.  A w + B v = b
//! ```
//!
//! with the graph-guided SVM instantiation `A = F`, `B = -I`, `b = 0`,
//! `l` the ridge-regularized hinge loss and `phi = nu * ||v||_1`. Three
//! proximal metrics are available: the identity (plain stochastic ADMM),
//! a diagonal AdaGrad-style metric and a full-matrix metric built from the
//! square root of the accumulated gradient outer products.
//!
//! All numerics are generic over [`Scalar`] (`f32` / `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the harness uses.

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense `f64` vector.
pub type Vector = linalg::DenseVector<f64>;
/// Sparse `f64` vector.
pub type Sparse = linalg::SparseVector<f64>;
/// Packed symmetric `f64` matrix.
pub type SymMatrix = linalg::SymmetricMatrix<f64>;
/// Diagonal `f64` matrix.
pub type DiagMatrix = linalg::DiagonalMatrix<f64>;
/// `f64` labelled example.
pub type Example = problem::Sample<f64>;
/// `f64` dataset.
pub type Data = problem::Dataset<f64>;
/// `f64` graph incidence operator.
pub type Graph = problem::GraphIncidence<f64>;
/// `f64` GGSVM regularization weights.
pub type Params = problem::GgsvmParams<f64>;
/// `f64` run configuration.
pub type Config = solver::RunConfig<f64>;
/// `f64` solver state.
pub type State = solver::SolverState<f64>;
/// `f64` metrics row.
pub type Record = data::MetricsRecord<f64>;

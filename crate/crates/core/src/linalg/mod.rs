//! Dense and sparse linear algebra used by the solvers.
//!
//! Everything here is a pure function of its inputs. The symmetric
//! eigensolver is a cyclic Jacobi iteration, which is accurate and more
//! than fast enough for the `d <= 512` feature dimensions this crate
//! targets.

mod cg;
mod dense;
mod eigen;
mod matrix;
mod prox;
mod sparse;
mod vector;

pub use cg::{cg_solve, CgOutcome, CgSettings};
pub use dense::Cholesky;
pub use eigen::{jacobi_eigen, psd_sqrt, SymmetricEigen, DEFAULT_CLAMP_TOL};
pub use matrix::{dual_norm_sq, g_norm_sq, DiagonalMatrix, Metric, SymmetricMatrix};
pub use prox::{soft_threshold, soft_threshold_scalar};
pub use sparse::SparseVector;
pub use vector::DenseVector;

pub(crate) use vector::dot as vector_dot;

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{jacobi_eigen, DenseVector, Metric, SymmetricEigen, SymmetricMatrix};
use crate::Scalar;

/// Which proximal metric the solver adapts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// `H_t = I` (plain stochastic ADMM).
    Identity,
    /// `H_t = a I + diag(s_t)`, `s_{t,i} = ||g_{1:t,i}||`.
    Diagonal,
    /// `H_t = a I + G_t^{1/2}`, `G_t = sum_{i<=t} g_i g_i^T`.
    Full,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Identity, PolicyKind::Diagonal, PolicyKind::Full];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Identity => "sadmm",
            PolicyKind::Diagonal => "ada-diag",
            PolicyKind::Full => "ada-full",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sadmm" | "identity" => Ok(PolicyKind::Identity),
            "ada-diag" | "diag" | "diagonal" => Ok(PolicyKind::Diagonal),
            "ada-full" | "full" => Ok(PolicyKind::Full),
            other => Err(Error::invalid(
                "algorithm",
                format!("unknown algorithm {other:?} (expected sadmm, ada-diag or ada-full)"),
            )),
        }
    }
}

/// Time-varying proximal metric `H_t`.
#[derive(Clone, Debug)]
pub enum MetricPolicy<T> {
    Identity {
        dim: usize,
    },
    Diagonal {
        a: T,
        /// Running `sum_{i<=t} g_i^2` per coordinate; `s_t` is its square root.
        sum_sq: DenseVector<T>,
    },
    Full {
        a: T,
        gram: SymmetricMatrix<T>,
        sqrt: SymmetricMatrix<T>,
        /// Eigendecomposition of `gram` from the latest update, reused for `H_t^{-1}`.
        eigen: Option<SymmetricEigen<T>>,
        clamp_tol: T,
    },
}

impl<T: Scalar> MetricPolicy<T> {
    /// `H_1 = a I` for the adaptive variants, `I` for the identity policy.
    pub fn new(kind: PolicyKind, dim: usize, a: T, clamp_tol: T) -> Self {
        match kind {
            PolicyKind::Identity => MetricPolicy::Identity { dim },
            PolicyKind::Diagonal => MetricPolicy::Diagonal {
                a,
                sum_sq: DenseVector::zeros(dim),
            },
            PolicyKind::Full => MetricPolicy::Full {
                a,
                gram: SymmetricMatrix::zeros(dim),
                sqrt: SymmetricMatrix::zeros(dim),
                eigen: None,
                clamp_tol,
            },
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            MetricPolicy::Identity { .. } => PolicyKind::Identity,
            MetricPolicy::Diagonal { .. } => PolicyKind::Diagonal,
            MetricPolicy::Full { .. } => PolicyKind::Full,
        }
    }

    /// Folds the new gradient into the metric.
    pub fn update(&mut self, g: &[T]) -> Result<()> {
        check_dim(Metric::dim(self), g.len())?;
        match self {
            MetricPolicy::Identity { .. } => {}
            MetricPolicy::Diagonal { sum_sq, .. } => {
                for (s, &gi) in sum_sq.iter_mut().zip(g) {
                    *s += gi * gi;
                }
            }
            MetricPolicy::Full {
                gram,
                sqrt,
                eigen,
                clamp_tol,
                ..
            } => {
                gram.add_rank1(T::one(), g);
                let e = jacobi_eigen(gram)?;
                *sqrt = e.sqrt_psd(*clamp_tol, gram.frobenius_norm())?;
                *eigen = Some(e);
            }
        }
        Ok(())
    }

    /// Diagonal adaptive scale `s_t` (diagonal policy only).
    pub fn diag_scale(&self) -> Option<DenseVector<T>> {
        match self {
            MetricPolicy::Diagonal { sum_sq, .. } => Some(sum_sq.iter().map(|s| s.sqrt()).collect()),
            _ => None,
        }
    }

    /// Diagonal of `H_t` when `H_t` is diagonal.
    pub fn diagonal(&self) -> Option<DenseVector<T>> {
        match self {
            MetricPolicy::Identity { dim } => Some(DenseVector::from_elem(*dim, T::one())),
            MetricPolicy::Diagonal { a, sum_sq } => Some(sum_sq.iter().map(|&s| *a + s.sqrt()).collect()),
            MetricPolicy::Full { .. } => None,
        }
    }

    /// Dense copy of `H_t`.
    pub fn to_matrix(&self) -> SymmetricMatrix<T> {
        match self {
            MetricPolicy::Full { a, sqrt, .. } => {
                let mut h = sqrt.clone();
                h.add_identity(*a);
                h
            }
            _ => SymmetricMatrix::from_diag(&self.diagonal().expect("diagonal policy")),
        }
    }

    /// Accumulated `G_t` (full policy only).
    pub fn gram(&self) -> Option<&SymmetricMatrix<T>> {
        match self {
            MetricPolicy::Full { gram, .. } => Some(gram),
            _ => None,
        }
    }

    /// Cached `G_t^{1/2}` (full policy only).
    pub fn gram_sqrt(&self) -> Option<&SymmetricMatrix<T>> {
        match self {
            MetricPolicy::Full { sqrt, .. } => Some(sqrt),
            _ => None,
        }
    }
}

impl<T: Scalar> Metric<T> for MetricPolicy<T> {
    fn dim(&self) -> usize {
        match self {
            MetricPolicy::Identity { dim } => *dim,
            MetricPolicy::Diagonal { sum_sq, .. } => sum_sq.len(),
            MetricPolicy::Full { gram, .. } => gram.dim(),
        }
    }

    fn apply_into(&self, x: &[T], out: &mut [T]) {
        match self {
            MetricPolicy::Identity { .. } => out.copy_from_slice(x),
            MetricPolicy::Diagonal { a, sum_sq } => {
                for ((o, &s), &xi) in out.iter_mut().zip(sum_sq.iter()).zip(x) {
                    *o = (*a + s.sqrt()) * xi;
                }
            }
            MetricPolicy::Full { a, sqrt, .. } => {
                sqrt.matvec_into(x, out);
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += *a * xi;
                }
            }
        }
    }

    fn solve(&self, g: &[T]) -> Result<DenseVector<T>> {
        check_dim(Metric::dim(self), g.len())?;
        match self {
            MetricPolicy::Identity { .. } => Ok(DenseVector::from(g.to_vec())),
            MetricPolicy::Diagonal { a, sum_sq } => {
                let out: DenseVector<T> = g
                    .iter()
                    .zip(sum_sq.iter())
                    .map(|(&gi, &s)| gi / (*a + s.sqrt()))
                    .collect();
                if out.is_finite() {
                    Ok(out)
                } else {
                    Err(Error::Singular)
                }
            }
            MetricPolicy::Full { a, eigen, .. } => {
                if !(*a > T::zero()) {
                    return Err(Error::Singular);
                }
                let Some(e) = eigen else {
                    return Ok(g.iter().map(|&x| x / *a).collect());
                };
                // H^{-1} = sum_k v_k v_k^T / (a + sqrt(max(l_k, 0)))
                let mut out = DenseVector::zeros(g.len());
                for k in 0..e.dim() {
                    let vk = e.vector(k);
                    let c = crate::linalg::vector_dot(vk, g) / (*a + e.values[k].max(T::zero()).sqrt());
                    for (o, &x) in out.iter_mut().zip(vk) {
                        *o += c * x;
                    }
                }
                Ok(out)
            }
        }
    }
}

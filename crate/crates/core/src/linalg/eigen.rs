use crate::error::{Error, Result};
use crate::linalg::{DenseVector, SymmetricMatrix};
use crate::Scalar;

/// Eigenvalues within `-DEFAULT_CLAMP_TOL * ||M||_F` of zero are treated as zero.
pub const DEFAULT_CLAMP_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `M = sum_k values[k] * v_k v_k^T` with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub values: DenseVector<T>,
    /// Row `k` (row-major, `n x n`) is the unit eigenvector for `values[k]`.
    pub vectors: Vec<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> &[T] {
        let n = self.dim();
        &self.vectors[k * n..(k + 1) * n]
    }

    /// `sum_k f(values[k]) v_k v_k^T`
    pub fn map(&self, mut f: impl FnMut(T) -> T) -> SymmetricMatrix<T> {
        let n = self.dim();
        let weights: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = SymmetricMatrix::zeros(n);
        for (k, &wk) in weights.iter().enumerate() {
            if wk != T::zero() {
                out.add_rank1(wk, self.vector(k));
            }
        }
        out
    }

    pub fn min_value(&self) -> T {
        self.values.first().copied().unwrap_or(T::zero())
    }

    /// PSD square root, treating eigenvalues with `|l| <= clamp_tol * scale` as zero.
    pub fn sqrt_psd(&self, clamp_tol: T, scale: T) -> Result<SymmetricMatrix<T>> {
        let floor = clamp_tol * scale;
        let min = self.min_value();
        if min < -floor {
            return Err(Error::NotPsd {
                eigenvalue: min.to_f64_lossy(),
                tolerance: floor.to_f64_lossy(),
            });
        }
        Ok(self.map(|l| if l <= floor { T::zero() } else { l.sqrt() }))
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn jacobi_eigen<T: Scalar>(m: &SymmetricMatrix<T>) -> Result<SymmetricEigen<T>> {
    let n = m.dim();
    let mut a = m.to_dense();
    // vt holds V^T: row k accumulates eigenvector k.
    let mut vt = vec![T::zero(); n * n];
    for i in 0..n {
        vt[i * n + i] = T::one();
    }
    let mut d: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
    let mut b = d.clone();
    let mut z = vec![T::zero(); n];
    let hundred = T::lit(100.0);
    let half = T::lit(0.5);

    let mut converged = n <= 1;
    for sweep in 1..=MAX_SWEEPS {
        if converged {
            break;
        }
        let mut sm = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                sm += a[p * n + q].abs();
            }
        }
        if sm == T::zero() {
            converged = true;
            break;
        }
        let tresh = if sweep < 4 {
            T::lit(0.2) * sm / T::from_usize_lossy(n * n)
        } else {
            T::zero()
        };
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let g = hundred * apq.abs();
                if sweep > 4 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    a[p * n + q] = T::zero();
                    continue;
                }
                if apq.abs() <= tresh {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = half * h / apq;
                    let t = T::one() / (theta.abs() + (T::one() + theta * theta).sqrt());
                    if theta < T::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let tau = s / (T::one() + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                a[p * n + q] = T::zero();
                let rot = |x: T, y: T| (x - s * (y + x * tau), y + s * (x - y * tau));
                for j in 0..p {
                    let (x, y) = rot(a[j * n + p], a[j * n + q]);
                    a[j * n + p] = x;
                    a[j * n + q] = y;
                }
                for j in p + 1..q {
                    let (x, y) = rot(a[p * n + j], a[j * n + q]);
                    a[p * n + j] = x;
                    a[j * n + q] = y;
                }
                for j in q + 1..n {
                    let (x, y) = rot(a[p * n + j], a[q * n + j]);
                    a[p * n + j] = x;
                    a[q * n + j] = y;
                }
                let (head, tail) = vt.split_at_mut(q * n);
                let vp = &mut head[p * n..(p + 1) * n];
                let vq = &mut tail[..n];
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (nx, ny) = rot(*x, *y);
                    *x = nx;
                    *y = ny;
                }
            }
        }
        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = T::zero();
        }
    }
    if !converged {
        return Err(Error::EigenNoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        vectors.extend_from_slice(&vt[k * n..(k + 1) * n]);
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Square root of a positive semidefinite matrix, `V diag(max(l, 0)^{1/2}) V^T`.
///
/// Eigenvalues below `-clamp_tol * ||M||_F` are rejected; those within
/// `clamp_tol * ||M||_F` of zero are set to zero, so rank-deficient inputs
/// yield the square root on their range.
pub fn psd_sqrt<T: Scalar>(m: &SymmetricMatrix<T>, clamp_tol: T) -> Result<SymmetricMatrix<T>> {
    jacobi_eigen(m)?.sqrt_psd(clamp_tol, m.frobenius_norm())
}

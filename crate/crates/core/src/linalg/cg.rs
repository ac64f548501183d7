use crate::linalg::vector::dot;
use crate::linalg::DenseVector;
use crate::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct CgSettings<T> {
    /// Relative residual target `||A x - b|| <= tol * ||b||`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> CgSettings<T> {
    /// Tolerance 1e-10 and `10 * dim` iterations.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 10 * dim.max(1),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome<T> {
    pub x: DenseVector<T>,
    pub iterations: usize,
    /// `||A x - b|| / ||b||` recomputed from the returned `x`.
    pub relative_residual: T,
    pub converged: bool,
}

/// Conjugate gradient for a symmetric positive definite operator.
///
/// `apply(x, out)` must write `A x` into `out`. Non-convergence is reported
/// through [`CgOutcome::converged`], never by panicking.
pub fn cg_solve<T, F>(
    mut apply: F,
    rhs: &[T],
    x0: &[T],
    settings: CgSettings<T>,
) -> CgOutcome<T>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]),
{
    let n = rhs.len();
    debug_assert_eq!(x0.len(), n);
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == T::zero() {
        return CgOutcome {
            x: DenseVector::zeros(n),
            iterations: 0,
            relative_residual: T::zero(),
            converged: true,
        };
    }
    let target = settings.tol * b_norm;

    let mut x = x0.to_vec();
    let mut ap = vec![T::zero(); n];
    apply(&x, &mut ap);
    let mut r: Vec<T> = rhs.iter().zip(&ap).map(|(&b, &a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;

    while rr.sqrt() > target && iterations < settings.max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        iterations += 1;
    }

    apply(&x, &mut ap);
    let true_res = rhs
        .iter()
        .zip(&ap)
        .map(|(&b, &a)| (b - a) * (b - a))
        .sum::<T>()
        .sqrt();
    let relative_residual = true_res / b_norm;
    CgOutcome {
        x: x.into(),
        iterations,
        relative_residual,
        converged: relative_residual <= settings.tol,
    }
}

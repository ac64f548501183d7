use crate::linalg::DenseVector;
use crate::Scalar;

/// `sign(z) * max(|z| - lambda, 0)`, the minimizer of `lambda |v| + (v - z)^2 / 2`.
#[inline]
pub fn soft_threshold_scalar<T: Scalar>(z: T, lambda: T) -> T {
    let m = z.abs() - lambda;
    if m > T::zero() {
        m.copysign(z)
    } else {
        T::zero()
    }
}

pub fn soft_threshold<T: Scalar>(z: &[T], lambda: T) -> DenseVector<T> {
    debug_assert!(lambda >= T::zero());
    z.iter().map(|&x| soft_threshold_scalar(x, lambda)).collect()
}

use crate::error::{Error, Result};
use crate::linalg::{DenseVector, SymmetricMatrix};
use crate::Scalar;

/// Cholesky factor `M = L L^T` of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    n: usize,
    // row-major lower triangle, full n x n storage
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(m: &SymmetricMatrix<T>) -> Result<Self> {
        let n = m.dim();
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = m.get(i, j);
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                for (&a, &b) in ri.iter().zip(rj) {
                    sum -= a * b;
                }
                if i == j {
                    if !(sum > T::zero()) || !sum.is_finite() {
                        return Err(Error::Singular);
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> DenseVector<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y.into()
    }

    pub fn log_det(&self) -> T {
        (0..self.n)
            .map(|i| self.l[i * self.n + i].ln())
            .sum::<T>()
            * T::lit(2.0)
    }
}

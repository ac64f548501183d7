use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::Scalar;

/// Sparse vector with strictly increasing 0-based indices and nonzero values.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector<T> {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseVector<T> {
    /// Builds a sparse vector; explicit zeros are dropped.
    pub fn new(dim: usize, indices: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::invalid(
                "sparse vector",
                format!("{} indices but {} values", indices.len(), values.len()),
            ));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid(
                    "sparse vector",
                    format!("indices not strictly increasing at {} -> {}", w[0], w[1]),
                ));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::invalid(
                    "sparse vector",
                    format!("index {last} out of range for dimension {dim}"),
                ));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("sparse vector", format!("non-finite value {v}")));
        }
        let (indices, values) = indices
            .into_iter()
            .zip(values)
            .filter(|(_, v)| !v.is_zero())
            .unzip();
        Ok(Self {
            dim,
            indices,
            values,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(x: &[T]) -> Self {
        let (indices, values) = x
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, &v)| (i, v))
            .unzip();
        Self {
            dim: x.len(),
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Widens the ambient dimension (indices are unchanged).
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if self.indices.last().is_some_and(|&i| i >= dim) {
            return Err(Error::invalid("sparse vector", "cannot shrink below max index"));
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn dot_dense(&self, w: &[T]) -> T {
        debug_assert_eq!(self.dim, w.len());
        self.iter().fold(T::zero(), |acc, (i, x)| acc + x * w[i])
    }

    /// `y += alpha * self`
    pub fn axpy_into(&self, alpha: T, y: &mut [T]) {
        for (i, x) in self.iter() {
            y[i] += alpha * x;
        }
    }

    pub fn to_dense(&self) -> DenseVector<T> {
        let mut out = DenseVector::zeros(self.dim);
        self.axpy_into(T::one(), &mut out);
        out
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_indices() {
        assert!(SparseVector::new(3, vec![1, 1], vec![1.0, 2.0]).is_err());
        assert!(SparseVector::new(3, vec![2, 1], vec![1.0, 2.0]).is_err());
        assert!(SparseVector::new(3, vec![3], vec![1.0]).is_err());
        assert!(SparseVector::new(3, vec![0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn drops_explicit_zeros() {
        let s = SparseVector::new(4, vec![0, 2, 3], vec![1.0, 0.0, -2.0]).unwrap();
        assert_eq!(s.indices(), &[0, 3]);
        assert_eq!(s.dot_dense(&[1.0, 1.0, 1.0, 1.0]), -1.0);
        assert_eq!(s.to_dense().as_slice(), &[1.0, 0.0, 0.0, -2.0]);
    }
}

use crate::error::{check_dim, Error, Result};
use crate::linalg::{Cholesky, DenseVector};
use crate::Scalar;

/// Symmetric `n x n` matrix stored as its packed upper triangle (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix<T> {
    n: usize,
    upper: Vec<T>,
}

impl<T: Scalar> SymmetricMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![T::zero(); n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![T::one(); n])
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    /// Builds from a generator evaluated on the upper triangle `i <= j`.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(f(i, j));
            }
        }
        Self { n, upper }
    }

    /// Builds from a row-major dense matrix, rejecting asymmetry above `tol`
    /// (relative to the largest entry). The stored value is the average of
    /// the two mirrored entries.
    pub fn from_dense(n: usize, rows: &[T], tol: T) -> Result<Self> {
        check_dim(n * n, rows.len())?;
        let scale = rows.iter().fold(T::zero(), |m, x| m.max(x.abs())).max(T::one());
        for i in 0..n {
            for j in i + 1..n {
                if (rows[i * n + j] - rows[j * n + i]).abs() > tol * scale {
                    return Err(Error::invalid(
                        "symmetric matrix",
                        format!("entries ({i},{j}) and ({j},{i}) differ"),
                    ));
                }
            }
        }
        let half = T::lit(0.5);
        Ok(Self::from_upper_fn(n, |i, j| {
            half * (rows[i * n + j] + rows[j * n + i])
        }))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.upper[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        let k = self.idx(i, j);
        self.upper[k] = value;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, value: T) {
        let k = self.idx(i, j);
        self.upper[k] += value;
    }

    pub fn to_dense(&self) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.get(i, j);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }

    pub fn diag(&self) -> DenseVector<T> {
        DenseVector::from_fn(self.n, |i| self.get(i, i))
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                s += if i == j { v * v } else { T::lit(2.0) * v * v };
            }
        }
        s.sqrt()
    }

    /// `y = self * x`
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = T::zero());
        let mut k = 0;
        for i in 0..self.n {
            let xi = x[i];
            let mut acc = self.upper[k] * xi;
            k += 1;
            for j in i + 1..self.n {
                let a = self.upper[k];
                acc += a * x[j];
                y[j] += a * xi;
                k += 1;
            }
            y[i] += acc;
        }
    }

    pub fn matvec(&self, x: &[T]) -> DenseVector<T> {
        let mut y = DenseVector::zeros(self.n);
        self.matvec_into(x, &mut y);
        y
    }

    /// `self += alpha * g g^T`
    pub fn add_rank1(&mut self, alpha: T, g: &[T]) {
        debug_assert_eq!(g.len(), self.n);
        let mut k = 0;
        for i in 0..self.n {
            let gi = alpha * g[i];
            for j in i..self.n {
                self.upper[k] += gi * g[j];
                k += 1;
            }
        }
    }

    pub fn add_identity(&mut self, alpha: T) {
        for i in 0..self.n {
            self.add_at(i, i, alpha);
        }
    }

    pub fn add_diag(&mut self, d: &[T]) {
        debug_assert_eq!(d.len(), self.n);
        for (i, &x) in d.iter().enumerate() {
            self.add_at(i, i, x);
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        for (a, &b) in self.upper.iter_mut().zip(&other.upper) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            n: self.n,
            upper: self.upper.iter().map(|&x| alpha * x).collect(),
        }
    }

    /// `self * self`, symmetric for symmetric input.
    pub fn square(&self) -> Self {
        let d = self.to_dense();
        let n = self.n;
        Self::from_upper_fn(n, |i, j| {
            let (ri, rj) = (&d[i * n..(i + 1) * n], &d[j * n..(j + 1) * n]);
            ri.iter().zip(rj).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
        })
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|x| x.is_finite())
    }
}

/// Diagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMatrix<T>(DenseVector<T>);

impl<T: Scalar> DiagonalMatrix<T> {
    pub fn new(diag: impl Into<DenseVector<T>>) -> Self {
        Self(diag.into())
    }

    pub fn identity(n: usize) -> Self {
        Self(DenseVector::from_elem(n, T::one()))
    }

    pub fn diag(&self) -> &DenseVector<T> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn to_symmetric(&self) -> SymmetricMatrix<T> {
        SymmetricMatrix::from_diag(&self.0)
    }
}

/// A symmetric positive (semi)definite matrix used as a metric `H`.
pub trait Metric<T: Scalar> {
    fn dim(&self) -> usize;

    /// `out = H x`
    fn apply_into(&self, x: &[T], out: &mut [T]);

    /// Solves `H x = g`; fails when `H` is singular.
    fn solve(&self, g: &[T]) -> Result<DenseVector<T>>;

    fn apply(&self, x: &[T]) -> DenseVector<T> {
        let mut out = DenseVector::zeros(self.dim());
        self.apply_into(x, &mut out);
        out
    }
}

impl<T: Scalar> Metric<T> for DiagonalMatrix<T> {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply_into(&self, x: &[T], out: &mut [T]) {
        for ((o, &h), &xi) in out.iter_mut().zip(self.0.iter()).zip(x) {
            *o = h * xi;
        }
    }

    fn solve(&self, g: &[T]) -> Result<DenseVector<T>> {
        check_dim(self.dim(), g.len())?;
        if self.0.iter().any(|&h| h <= T::zero()) {
            return Err(Error::Singular);
        }
        Ok(self.0.iter().zip(g).map(|(&h, &gi)| gi / h).collect())
    }
}

impl<T: Scalar> Metric<T> for SymmetricMatrix<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[T], out: &mut [T]) {
        self.matvec_into(x, out);
    }

    fn solve(&self, g: &[T]) -> Result<DenseVector<T>> {
        check_dim(self.n, g.len())?;
        Ok(Cholesky::factor(self)?.solve(g))
    }
}

/// `w^T H w`.
pub fn g_norm_sq<T: Scalar, M: Metric<T> + ?Sized>(w: &[T], h: &M) -> Result<T> {
    check_dim(h.dim(), w.len())?;
    let hw = h.apply(w);
    Ok(super::vector::dot(w, &hw))
}

/// `g^T H^{-1} g`, the squared dual norm. `H` must be positive definite.
pub fn dual_norm_sq<T: Scalar, M: Metric<T> + ?Sized>(g: &[T], h: &M) -> Result<T> {
    check_dim(h.dim(), g.len())?;
    let x = h.solve(g)?;
    Ok(super::vector::dot(g, &x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_layout_roundtrip() {
        let n = 4;
        let m = SymmetricMatrix::<f64>::from_upper_fn(n, |i, j| (10 * i + j) as f64);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                assert_eq!(m.get(i, j), (10 * a + b) as f64);
            }
        }
        let d = m.to_dense();
        let y = m.matvec(&[1.0, 2.0, 3.0, 4.0]);
        for i in 0..n {
            let e: f64 = (0..n).map(|j| d[i * n + j] * (j + 1) as f64).sum();
            assert_eq!(y[i], e);
        }
    }

    #[test]
    fn g_norm_examples() {
        let w = [1.0, 1.0];
        assert_eq!(g_norm_sq(&w, &DiagonalMatrix::identity(2)).unwrap(), 2.0);
        let h = DiagonalMatrix::new(vec![3.0, 4.0]);
        assert_eq!(g_norm_sq(&[1.0, 2.0], &h).unwrap(), 19.0);
        assert!(g_norm_sq(&[1.0], &h).is_err());
    }

    #[test]
    fn dual_norm_examples() {
        let h = DiagonalMatrix::new(vec![2.0, 1.0]);
        assert_eq!(dual_norm_sq(&[2.0, 0.0], &h).unwrap(), 2.0);
        let g = [0.3, -1.2, 2.0];
        let i3 = SymmetricMatrix::identity(3);
        let n2: f64 = g.iter().map(|x| x * x).sum();
        assert!((dual_norm_sq(&g, &i3).unwrap() - n2).abs() < 1e-15);
        let singular = DiagonalMatrix::new(vec![1.0, 0.0]);
        assert!(matches!(dual_norm_sq(&[1.0, 1.0], &singular), Err(Error::Singular)));
        assert!(matches!(
            dual_norm_sq(&[1.0, 1.0], &SymmetricMatrix::<f64>::zeros(2)),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn rank1_and_frobenius() {
        let mut m = SymmetricMatrix::<f64>::zeros(2);
        m.add_rank1(1.0, &[3.0, 4.0]);
        assert_eq!(m.trace(), 25.0);
        assert!((m.frobenius_norm() - 25.0).abs() < 1e-12);
    }
}

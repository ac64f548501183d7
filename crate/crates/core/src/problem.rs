//! Graph-guided SVM problem instance.
//!
//! ```text
//! min_{w, v} (1/n) sum_i [1 - y_i x_i^T w]_+ + (gamma/2) ||w||^2 + nu ||v||_1
//! s.t.       F w - v = 0
//! ```
//!
//! The per-example loss handed to the solver is
//! `l(w, (x, y)) = [1 - y x^T w]_+ + (gamma/2) ||w||^2`; the ℓ1 term lives on
//! `v`, and `F` is the edge-incidence operator of a feature graph.

use std::collections::HashSet;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{DenseVector, SparseVector, SymmetricMatrix};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    #[inline]
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Label::Positive => T::one(),
            Label::Negative => -T::one(),
        }
    }

    /// Tie convention: a zero score predicts `Positive`.
    #[inline]
    pub fn predict<T: Scalar>(score: T) -> Self {
        if score >= T::zero() {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub features: SparseVector<T>,
    pub label: Label,
}

impl<T: Scalar> Sample<T> {
    pub fn new(features: SparseVector<T>, label: Label) -> Self {
        Self { features, label }
    }

    /// `y x^T w`
    #[inline]
    pub fn margin(&self, w: &[T]) -> T {
        self.label.sign::<T>() * self.features.dot_dense(w)
    }
}

/// Nonempty collection of samples sharing one feature dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    samples: Vec<Sample<T>>,
    dim: usize,
}

impl<T: Scalar> Dataset<T> {
    /// Samples with a smaller ambient dimension are widened to `dim`.
    pub fn new(samples: Vec<Sample<T>>, dim: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("dataset", "no samples"));
        }
        let samples = samples
            .into_iter()
            .map(|mut s| {
                if s.features.dim() > dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: s.features.dim(),
                    });
                }
                s.features = s.features.with_dim(dim)?;
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples, dim })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &Sample<T> {
        &self.samples[i]
    }

    pub fn into_samples(self) -> Vec<Sample<T>> {
        self.samples
    }

    /// New dataset holding the samples at `indices` (in that order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.samples[i].clone()).collect(),
            self.dim,
        )
    }

    /// Per-feature max absolute value (1 for all-zero features).
    pub fn max_abs_scale(&self) -> DenseVector<T> {
        let mut m = DenseVector::<T>::zeros(self.dim);
        for s in &self.samples {
            for (i, x) in s.features.iter() {
                m[i] = m[i].max(x.abs());
            }
        }
        m.iter_mut().for_each(|x| {
            if x.is_zero() {
                *x = T::one();
            }
        });
        m
    }

    /// Divides every feature by `scale[i]`.
    pub fn rescaled(&self, scale: &[T]) -> Result<Self> {
        check_dim(self.dim, scale.len())?;
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let mut f = s.features.clone();
                let idx = f.indices().to_vec();
                for (v, i) in f.values_mut().iter_mut().zip(idx) {
                    *v /= scale[i];
                }
                Sample::new(f, s.label)
            })
            .collect();
        Self::new(samples, self.dim)
    }

    /// Fraction of samples labelled `Positive`.
    pub fn positive_fraction(&self) -> T {
        let p = self
            .samples
            .iter()
            .filter(|s| s.label == Label::Positive)
            .count();
        T::from_usize_lossy(p) / T::from_usize_lossy(self.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<T> {
    pub i: usize,
    pub j: usize,
    pub weight: T,
}

/// Incidence operator `F` of a weighted feature graph: row `k` of `F` is
/// `+alpha` at `i` and `-alpha` at `j` for the `k`-th edge `(i, j, alpha)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphIncidence<T> {
    dim: usize,
    edges: Vec<Edge<T>>,
    gram: SymmetricMatrix<T>,
}

impl<T: Scalar> GraphIncidence<T> {
    pub fn new(dim: usize, edges: Vec<Edge<T>>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            if e.i >= e.j {
                return Err(Error::invalid(
                    "graph edge",
                    format!("edge {k}: need i < j, got ({}, {})", e.i, e.j),
                ));
            }
            if e.j >= dim {
                return Err(Error::invalid(
                    "graph edge",
                    format!("edge {k}: index {} out of range for dimension {dim}", e.j),
                ));
            }
            if e.weight.is_zero() || !e.weight.is_finite() {
                return Err(Error::invalid(
                    "graph edge",
                    format!("edge {k}: weight must be finite and nonzero"),
                ));
            }
            if !seen.insert((e.i, e.j)) {
                return Err(Error::invalid(
                    "graph edge",
                    format!("edge {k}: duplicate pair ({}, {})", e.i, e.j),
                ));
            }
        }
        let mut gram = SymmetricMatrix::zeros(dim);
        for e in &edges {
            let a2 = e.weight * e.weight;
            gram.add_at(e.i, e.i, a2);
            gram.add_at(e.j, e.j, a2);
            gram.add_at(e.i, e.j, -a2);
        }
        Ok(Self { dim, edges, gram })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            edges: Vec::new(),
            gram: SymmetricMatrix::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rows `m` of `F`.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    /// Cached `F^T F`.
    pub fn gram(&self) -> &SymmetricMatrix<T> {
        &self.gram
    }

    /// `F w`
    pub fn apply(&self, w: &[T]) -> DenseVector<T> {
        debug_assert_eq!(w.len(), self.dim);
        self.edges
            .iter()
            .map(|e| e.weight * (w[e.i] - w[e.j]))
            .collect()
    }

    /// `out += alpha * F^T theta`
    pub fn apply_transpose_add(&self, alpha: T, theta: &[T], out: &mut [T]) {
        debug_assert_eq!(theta.len(), self.edges.len());
        for (e, &t) in self.edges.iter().zip(theta) {
            let c = alpha * e.weight * t;
            out[e.i] += c;
            out[e.j] -= c;
        }
    }

    /// `F^T theta`
    pub fn apply_transpose(&self, theta: &[T]) -> DenseVector<T> {
        let mut out = DenseVector::zeros(self.dim);
        self.apply_transpose_add(T::one(), theta, &mut out);
        out
    }

    /// `out += alpha * F^T F x`, computed edge by edge.
    pub fn gram_apply_add(&self, alpha: T, x: &[T], out: &mut [T]) {
        for e in &self.edges {
            let c = alpha * e.weight * e.weight * (x[e.i] - x[e.j]);
            out[e.i] += c;
            out[e.j] -= c;
        }
    }

    /// Row-major dense `m x d` copy of `F`.
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.edges.len() * self.dim];
        for (k, e) in self.edges.iter().enumerate() {
            out[k * self.dim + e.i] = e.weight;
            out[k * self.dim + e.j] = -e.weight;
        }
        out
    }
}

/// Ridge weight `gamma` on `w` and ℓ1 weight `nu` on `v`, both positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GgsvmParams<T> {
    pub gamma: T,
    pub nu: T,
}

impl<T: Scalar> GgsvmParams<T> {
    pub fn new(gamma: T, nu: T) -> Result<Self> {
        if !(gamma > T::zero() && nu > T::zero()) || !gamma.is_finite() || !nu.is_finite() {
            return Err(Error::invalid(
                "ggsvm params",
                format!("gamma = {gamma}, nu = {nu}; both must be positive"),
            ));
        }
        Ok(Self { gamma, nu })
    }

    /// `gamma = nu = 1/n`.
    pub fn for_sample_count(n: usize) -> Result<Self> {
        let r = T::one() / T::from_usize_lossy(n.max(1));
        Self::new(r, r)
    }
}

#[inline]
pub fn hinge<T: Scalar>(w: &[T], sample: &Sample<T>) -> T {
    (T::one() - sample.margin(w)).max(T::zero())
}

/// `[1 - y x^T w]_+ + (gamma/2) ||w||^2`
pub fn instance_loss<T: Scalar>(w: &[T], sample: &Sample<T>, params: &GgsvmParams<T>) -> T {
    hinge(w, sample) + T::lit(0.5) * params.gamma * crate::linalg::vector_dot(w, w)
}

/// `gamma w - y x [y x^T w < 1]`; the hinge contributes nothing at the kink.
pub fn stochastic_subgradient<T: Scalar>(
    w: &[T],
    sample: &Sample<T>,
    params: &GgsvmParams<T>,
) -> DenseVector<T> {
    debug_assert_eq!(w.len(), sample.features.dim());
    let mut g: DenseVector<T> = w.iter().map(|&x| params.gamma * x).collect();
    if sample.margin(w) < T::one() {
        sample.features.axpy_into(-sample.label.sign::<T>(), &mut g);
    }
    g
}

/// Mean of [`stochastic_subgradient`] over the dataset, summed in sample order.
pub fn full_gradient<T: Scalar>(
    w: &[T],
    data: &Dataset<T>,
    params: &GgsvmParams<T>,
) -> DenseVector<T> {
    let mut acc = DenseVector::zeros(data.dim());
    for s in data.samples() {
        let g = stochastic_subgradient(w, s, params);
        for (a, gi) in acc.iter_mut().zip(g.iter()) {
            *a += *gi;
        }
    }
    let n = T::from_usize_lossy(data.len());
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// `(1/n) sum_i hinge_i + (gamma/2) ||w||^2`
pub fn empirical_loss<T: Scalar>(w: &[T], data: &Dataset<T>, params: &GgsvmParams<T>) -> T {
    let hinge_sum: T = data.samples().iter().map(|s| hinge(w, s)).sum();
    hinge_sum / T::from_usize_lossy(data.len())
        + T::lit(0.5) * params.gamma * crate::linalg::vector_dot(w, w)
}

/// `(1/n) sum_i [1 - y_i x_i^T w]_+ + (gamma/2) ||w||^2 + nu ||v||_1`
pub fn objective<T: Scalar>(
    w: &[T],
    v: &[T],
    data: &Dataset<T>,
    params: &GgsvmParams<T>,
) -> T {
    let l1: T = v.iter().map(|x| x.abs()).sum();
    empirical_loss(w, data, params) + params.nu * l1
}

/// `||F w - v||_2`
pub fn feasibility<T: Scalar>(w: &[T], v: &[T], graph: &GraphIncidence<T>) -> T {
    debug_assert_eq!(v.len(), graph.num_edges());
    graph
        .apply(w)
        .iter()
        .zip(v)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        .sqrt()
}

/// Fraction of samples whose predicted label differs from the true one.
pub fn test_error<T: Scalar>(w: &[T], test: &Dataset<T>) -> T {
    let wrong = test
        .samples()
        .iter()
        .filter(|s| Label::predict(s.features.dot_dense(w)) != s.label)
        .count();
    T::from_usize_lossy(wrong) / T::from_usize_lossy(test.len())
}

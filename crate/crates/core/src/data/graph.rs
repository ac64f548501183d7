use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SymmetricMatrix};
use crate::problem::{Dataset, Edge, GraphIncidence, Sample};
use crate::Scalar;

/// Sparsity-pattern heuristic for the feature graph: threshold the
/// entries of a shrinkage-regularized precision matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GraphHeuristic<T> {
    /// Ridge added to the covariance; default `0.1 * mean(diag(cov))`.
    pub shrinkage: Option<T>,
    /// Keep pairs with `|P_ij| > threshold`; default `1e-8 * max_{i<j} |P_ij|`.
    pub threshold: Option<T>,
    /// Edge cap, keeping the largest `|P_ij|`; default `4 * d`.
    pub max_edges: Option<usize>,
}

impl<T: Scalar> GraphHeuristic<T> {
    pub fn build(&self, data: &Dataset<T>) -> Result<GraphIncidence<T>> {
        let cov = empirical_covariance(data);
        let d = data.dim();
        let shrinkage = self
            .shrinkage
            .unwrap_or_else(|| T::lit(0.1) * cov.trace() / T::from_usize_lossy(d.max(1)));
        build_from_covariance(&cov, shrinkage, self.threshold, self.max_edges.unwrap_or(4 * d))
    }
}

fn canonical_order<T: Scalar>(a: &Sample<T>, b: &Sample<T>) -> Ordering {
    a.label
        .cmp(&b.label)
        .then_with(|| a.features.indices().cmp(b.features.indices()))
        .then_with(|| {
            for (x, y) in a.features.values().iter().zip(b.features.values()) {
                match x.partial_cmp(y) {
                    Some(Ordering::Equal) | None => continue,
                    Some(o) => return o,
                }
            }
            Ordering::Equal
        })
}

/// `(1/n) sum_i (x_i - mu)(x_i - mu)^T`, accumulated in a canonical sample
/// order so the result does not depend on the order of the dataset.
pub fn empirical_covariance<T: Scalar>(data: &Dataset<T>) -> SymmetricMatrix<T> {
    let d = data.dim();
    let mut order: Vec<&Sample<T>> = data.samples().iter().collect();
    order.sort_by(|a, b| canonical_order(a, b));
    let n = T::from_usize_lossy(order.len());

    let mut mean = vec![T::zero(); d];
    let mut second = SymmetricMatrix::zeros(d);
    for s in &order {
        s.features.axpy_into(T::one(), &mut mean);
        let (idx, val) = (s.features.indices(), s.features.values());
        for a in 0..idx.len() {
            for b in a..idx.len() {
                second.add_at(idx[a], idx[b], val[a] * val[b]);
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = second.scaled(T::one() / n);
    cov.add_rank1(-T::one(), &mean);
    cov
}

fn build_from_covariance<T: Scalar>(
    cov: &SymmetricMatrix<T>,
    shrinkage: T,
    threshold: Option<T>,
    max_edges: usize,
) -> Result<GraphIncidence<T>> {
    let d = cov.dim();
    if d < 2 {
        return Err(Error::invalid("graph", format!("need at least 2 features, got {d}")));
    }
    let mut reg = cov.clone();
    reg.add_identity(shrinkage);
    let chol = Cholesky::factor(&reg).map_err(|_| Error::SingularCovariance {
        shrinkage: shrinkage.to_f64_lossy(),
    })?;
    let mut precision = SymmetricMatrix::zeros(d);
    let mut e = vec![T::zero(); d];
    for j in 0..d {
        e[j] = T::one();
        let col = chol.solve(&e);
        for i in 0..=j {
            precision.set(i, j, col[i]);
        }
        e[j] = T::zero();
    }
    if !precision.is_finite() {
        return Err(Error::SingularCovariance {
            shrinkage: shrinkage.to_f64_lossy(),
        });
    }

    let mut max_off = T::zero();
    for i in 0..d {
        for j in i + 1..d {
            max_off = max_off.max(precision.get(i, j).abs());
        }
    }
    let threshold = threshold.unwrap_or(T::lit(1e-8) * max_off);
    let mut candidates: Vec<(T, usize, usize)> = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let p = precision.get(i, j).abs();
            if p > threshold {
                candidates.push((p, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then((a.1, a.2).cmp(&(b.1, b.2)))
    });
    candidates.truncate(max_edges);
    candidates.sort_by_key(|&(_, i, j)| (i, j));
    let edges = candidates
        .into_iter()
        .map(|(_, i, j)| Edge { i, j, weight: T::one() })
        .collect();
    GraphIncidence::new(d, edges)
}

/// Connects every feature pair whose regularized precision entry
/// `((cov + shrinkage I)^{-1})_{ij}` exceeds `threshold` in magnitude, keeping
/// at most `max_edges` of the largest, each with weight 1.
pub fn build_graph_precision<T: Scalar>(
    data: &Dataset<T>,
    shrinkage: T,
    threshold: T,
    max_edges: usize,
) -> Result<GraphIncidence<T>> {
    build_from_covariance(&empirical_covariance(data), shrinkage, Some(threshold), max_edges)
}

//! Numerical checks of the optimality and regret statements behind the
//! adaptive metrics: the two proximal-metric minimizers, the per-run
//! dual-norm inequalities and the averaged-iterate convergence bound.

use std::fmt;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    dual_norm_sq, g_norm_sq, jacobi_eigen, psd_sqrt, soft_threshold, Cholesky, DenseVector,
    SparseVector, SymmetricMatrix,
};
use crate::problem::{
    feasibility, full_gradient, objective, Dataset, Edge, GgsvmParams, GraphIncidence, Label,
    Sample,
};
use crate::rng::Prng;
use crate::solver::{GradientLog, PolicyKind, RunConfig, SolverState, StepSize};
use crate::Scalar;

fn columns_norm<T: Scalar, G: AsRef<[T]>>(grads: &[G]) -> Result<Vec<T>> {
    let d = grads
        .first()
        .map(|g| g.as_ref().len())
        .ok_or_else(|| Error::invalid("gradients", "empty gradient list"))?;
    let mut sq = vec![T::zero(); d];
    for g in grads {
        let g = g.as_ref();
        check_dim(d, g.len())?;
        for (s, &x) in sq.iter_mut().zip(g) {
            *s += x * x;
        }
    }
    Ok(sq)
}

/// `sum_i c_i / s_i` with the pseudo-inverse convention `0/0 = 0`.
fn diag_objective<T: Scalar>(col_sq: &[T], s: &[T]) -> T {
    col_sq
        .iter()
        .zip(s)
        .map(|(&c, &si)| {
            if c == T::zero() {
                T::zero()
            } else if si <= T::zero() {
                T::infinity()
            } else {
                c / si
            }
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct Prop1Report<T> {
    pub c: T,
    /// `s_i = c ||g_{1:T,i}|| / sum_j ||g_{1:T,j}||`
    pub s: Vec<T>,
    /// `sum_t g_t^T diag(s)^{-1} g_t` at the closed form.
    pub attained: T,
    /// `(sum_i ||g_{1:T,i}||)^2 / c`
    pub predicted: T,
    pub best_candidate: T,
    pub candidates: usize,
    /// `attained - best_candidate`; nonpositive when the closed form wins.
    pub margin: T,
    pub relative_error: T,
}

impl<T: Scalar> Prop1Report<T> {
    pub fn passed(&self, rel_tol: T) -> bool {
        self.margin <= T::zero() && self.relative_error <= rel_tol
    }
}

impl<T: Scalar> fmt::Display for Prop1Report<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "diagonal minimizer: attained {:.15e}, predicted {:.15e} (rel err {:.3e}), best of {} candidates {:.15e}, margin {:.15e}",
            self.attained, self.predicted, self.relative_error, self.candidates, self.best_candidate, self.margin
        )
    }
}

/// Compares the closed-form minimizer of `sum_t g_t^T diag(s)^{-1} g_t` over
/// `{s >= 0, 1^T s <= c}` against `samples` random feasible points.
pub fn check_prop1<T: Scalar, G: AsRef<[T]>>(
    grads: &[G],
    c: T,
    samples: usize,
    seed: u64,
) -> Result<Prop1Report<T>> {
    if !(c > T::zero()) {
        return Err(Error::invalid("c", "must be positive"));
    }
    let col_sq = columns_norm(grads)?;
    let norms: Vec<T> = col_sq.iter().map(|x| x.sqrt()).collect();
    let total: T = norms.iter().copied().sum();
    if total == T::zero() {
        return Err(Error::invalid("gradients", "all columns are zero"));
    }
    let s: Vec<T> = norms.iter().map(|&n| c * n / total).collect();
    let attained = diag_objective(&col_sq, &s);
    let predicted = total * total / c;

    let d = s.len();
    let mut rng = Prng::seeded(seed);
    let mut best = T::infinity();
    let mut e = vec![0.0; d + 1];
    let mut cand = vec![T::zero(); d];
    for _ in 0..samples {
        // uniform on the simplex with a slack coordinate e[d]
        e.iter_mut().for_each(|x| *x = rng.exponential());
        let sum: f64 = e.iter().sum();
        for (ci, &ei) in cand.iter_mut().zip(&e) {
            *ci = c * T::lit(ei / sum);
        }
        best = best.min(diag_objective(&col_sq, &cand));
    }
    Ok(Prop1Report {
        c,
        s,
        attained,
        predicted,
        best_candidate: best,
        candidates: samples,
        margin: attained - best,
        relative_error: (attained - predicted).abs() / predicted.abs().max(T::min_positive_value()),
    })
}

#[derive(Clone, Debug)]
pub struct Prop2Report<T> {
    pub c: T,
    /// `c G^{1/2} / tr(G^{1/2})`
    pub s: SymmetricMatrix<T>,
    /// `sum_t g_t^T S^+ g_t` at the closed form.
    pub attained: T,
    /// `tr(G^{1/2})^2 / c`
    pub sqrt_trace_sq_over_c: T,
    /// `tr(G) / c`
    pub trace_over_c: T,
    pub best_candidate: T,
    pub candidates: usize,
    pub margin: T,
}

impl<T: Scalar> Prop2Report<T> {
    pub fn passed(&self) -> bool {
        self.margin <= T::zero()
    }
}

impl<T: Scalar> fmt::Display for Prop2Report<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "full minimizer: attained {:.15e}, tr(G^1/2)^2/c {:.15e}, tr(G)/c {:.15e}, best of {} candidates {:.15e}, margin {:.15e}",
            self.attained,
            self.sqrt_trace_sq_over_c,
            self.trace_over_c,
            self.candidates,
            self.best_candidate,
            self.margin
        )
    }
}

/// `sum_t g_t^T S^+ g_t` through an eigendecomposition; directions of `g`
/// outside the range of `S` make the value infinite.
fn pinv_quadratic<T: Scalar, G: AsRef<[T]>>(s: &SymmetricMatrix<T>, grads: &[G]) -> Result<T> {
    let eig = jacobi_eigen(s)?;
    let lmax = eig.values.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let cutoff = T::lit(1e-12) * lmax;
    let mut total = T::zero();
    for g in grads {
        let g = g.as_ref();
        let gg: T = g.iter().map(|&x| x * x).sum();
        let mut in_range = T::zero();
        for (k, &lambda) in eig.values.iter().enumerate() {
            let p: T = eig.vector(k).iter().zip(g).map(|(&a, &b)| a * b).sum();
            if lambda > cutoff {
                total += p * p / lambda;
                in_range += p * p;
            }
        }
        if gg - in_range > T::lit(1e-10) * gg.max(T::one()) {
            return Ok(T::infinity());
        }
    }
    Ok(total)
}

/// Compares `S = c G^{1/2} / tr(G^{1/2})` against `samples` random
/// normalized Wishart matrices `c A A^T / tr(A A^T)`.
pub fn check_prop2<T: Scalar, G: AsRef<[T]>>(
    grads: &[G],
    c: T,
    samples: usize,
    seed: u64,
) -> Result<Prop2Report<T>> {
    if !(c > T::zero()) {
        return Err(Error::invalid("c", "must be positive"));
    }
    let col_sq = columns_norm(grads)?;
    let d = col_sq.len();
    let mut gram = SymmetricMatrix::zeros(d);
    for g in grads {
        gram.add_rank1(T::one(), g.as_ref());
    }
    let root = psd_sqrt(&gram, T::lit(crate::linalg::DEFAULT_CLAMP_TOL))?;
    let tr_root = root.trace();
    if tr_root == T::zero() {
        return Err(Error::invalid("gradients", "all gradients are zero"));
    }
    let s = root.scaled(c / tr_root);
    let attained = pinv_quadratic(&s, grads)?;

    let mut rng = Prng::seeded(seed);
    let mut best = T::infinity();
    let mut a = vec![T::zero(); d * d];
    for _ in 0..samples {
        a.iter_mut().for_each(|x| *x = T::lit(rng.normal()));
        let w = SymmetricMatrix::from_upper_fn(d, |i, j| {
            (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum()
        });
        let cand = w.scaled(c / w.trace());
        let Ok(chol) = Cholesky::factor(&cand) else {
            continue;
        };
        let value: T = grads
            .iter()
            .map(|g| {
                let g = g.as_ref();
                chol.solve(g).iter().zip(g).map(|(&x, &y)| x * y).sum::<T>()
            })
            .sum();
        best = best.min(value);
    }
    Ok(Prop2Report {
        c,
        s,
        attained,
        sqrt_trace_sq_over_c: tr_root * tr_root / c,
        trace_over_c: gram.trace() / c,
        best_candidate: best,
        candidates: samples,
        margin: attained - best,
    })
}

/// One side-by-side evaluation of a dual-norm inequality.
#[derive(Clone, Debug)]
pub struct InequalityReport<T> {
    pub policy: PolicyKind,
    pub steps: usize,
    /// `sum_t ||g_t||^2_{H_t^*}`
    pub lhs: T,
    /// `2 sum_i ||g_{1:T,i}||` (diagonal) or `2 tr(G_T^{1/2})` (full).
    pub rhs: T,
    pub margin: T,
}

impl<T: Scalar> InequalityReport<T> {
    pub fn passed(&self) -> bool {
        self.lhs <= self.rhs + T::lit(1e-12) * self.rhs.abs()
    }
}

impl<T: Scalar> fmt::Display for InequalityReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} over {} steps: lhs {:.15e} <= rhs {:.15e} (margin {:.15e}) {}",
            self.policy,
            self.steps,
            self.lhs,
            self.rhs,
            self.margin,
            if self.passed() { "holds" } else { "VIOLATED" }
        )
    }
}

/// Evaluates the dual-norm sum of a logged run against its adaptive bound.
pub fn check_run_inequalities<T: Scalar>(
    log: &GradientLog<T>,
    policy: PolicyKind,
) -> Result<InequalityReport<T>> {
    let rhs = match policy {
        PolicyKind::Identity => {
            return Err(Error::invalid("policy", "the identity metric has no adaptive bound"))
        }
        PolicyKind::Diagonal => T::lit(2.0) * log.column_sq.iter().map(|x| x.sqrt()).sum::<T>(),
        PolicyKind::Full => {
            let gram = log
                .gram
                .as_ref()
                .ok_or_else(|| Error::invalid("gradient log", "no outer-product sum recorded"))?;
            T::lit(2.0) * psd_sqrt(gram, T::lit(crate::linalg::DEFAULT_CLAMP_TOL))?.trace()
        }
    };
    Ok(InequalityReport {
        policy,
        steps: log.steps,
        lhs: log.dual_norm_sum,
        rhs,
        margin: log.dual_norm_sum - rhs,
    })
}

/// A high-accuracy minimizer of the regularized objective with `v = F w`.
#[derive(Clone, Debug)]
pub struct ReferenceOptimum<T> {
    pub w: DenseVector<T>,
    pub v: DenseVector<T>,
    pub objective: T,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
}

#[derive(Clone, Copy, Debug)]
pub struct ReferenceSettings<T> {
    pub penalty: T,
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for ReferenceSettings<T> {
    fn default() -> Self {
        Self {
            penalty: T::one(),
            tol: T::lit(1e-9),
            max_iter: 1_000_000,
        }
    }
}

/// Batch ADMM on `min (1/n) sum_i h(z_i) + gamma/2 ||w||^2 + nu ||u||_1`
/// subject to `z = A w`, `u = F w`, where `A` stacks `y_i x_i^T` and `h` is the
/// hinge `max(0, 1 - z)`. Stops when primal and dual residuals are both below
/// `tol`.
pub fn reference_optimum<T: Scalar>(
    data: &Dataset<T>,
    graph: &GraphIncidence<T>,
    params: &GgsvmParams<T>,
    settings: ReferenceSettings<T>,
) -> Result<ReferenceOptimum<T>> {
    check_dim(data.dim(), graph.dim())?;
    let (n, d, m) = (data.len(), data.dim(), graph.num_edges());
    let rho = settings.penalty;
    let rows: Vec<SparseVector<T>> = data
        .samples()
        .iter()
        .map(|s| {
            let mut r = s.features.clone();
            let y = s.label.sign::<T>();
            r.values_mut().iter_mut().for_each(|x| *x *= y);
            r
        })
        .collect();

    let mut k = SymmetricMatrix::identity(d).scaled(params.gamma);
    for r in &rows {
        let dense = r.to_dense();
        k.add_rank1(rho, &dense);
    }
    k.add_scaled(rho, graph.gram());
    let chol = Cholesky::factor(&k)?;

    let kappa = T::one() / (T::from_usize_lossy(n) * rho);
    let mut z = vec![T::zero(); n];
    let mut u = DenseVector::zeros(m);
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); m];
    let (mut primal, mut dual) = (T::infinity(), T::infinity());

    for it in 1..=settings.max_iter {
        let mut rhs = vec![T::zero(); d];
        for (r, (&zi, &pi)) in rows.iter().zip(z.iter().zip(&p)) {
            r.axpy_into(rho * (zi - pi), &mut rhs);
        }
        let uq: Vec<T> = u.iter().zip(&q).map(|(&a, &b)| a - b).collect();
        graph.apply_transpose_add(rho, &uq, &mut rhs);
        let w = chol.solve(&rhs);

        let aw: Vec<T> = rows.iter().map(|r| r.dot_dense(&w)).collect();
        let fw = graph.apply(&w);
        let z_old = std::mem::take(&mut z);
        z = aw
            .iter()
            .zip(&p)
            .map(|(&a, &pi)| {
                let s = a + pi;
                if s >= T::one() {
                    s
                } else if s < T::one() - kappa {
                    s + kappa
                } else {
                    T::one()
                }
            })
            .collect();
        let shifted: Vec<T> = fw.iter().zip(&q).map(|(&a, &b)| a + b).collect();
        let u_old = std::mem::replace(&mut u, soft_threshold(&shifted, params.nu / rho));

        let mut r2 = T::zero();
        for i in 0..n {
            let r = aw[i] - z[i];
            p[i] += r;
            r2 += r * r;
        }
        for e in 0..m {
            let r = fw[e] - u[e];
            q[e] += r;
            r2 += r * r;
        }
        let mut s = vec![T::zero(); d];
        for (row, (&zn, &zo)) in rows.iter().zip(z.iter().zip(&z_old)) {
            row.axpy_into(rho * (zn - zo), &mut s);
        }
        let du: Vec<T> = u.iter().zip(u_old.iter()).map(|(&a, &b)| a - b).collect();
        graph.apply_transpose_add(rho, &du, &mut s);
        primal = r2.sqrt();
        dual = s.iter().map(|&x| x * x).sum::<T>().sqrt();
        if !(primal.is_finite() && dual.is_finite()) {
            break;
        }
        if primal <= settings.tol && dual <= settings.tol {
            let v = graph.apply(&w);
            let obj = objective(&w, &v, data, params);
            return Ok(ReferenceOptimum {
                w,
                v,
                objective: obj,
                iterations: it,
                primal_residual: primal,
                dual_residual: dual,
            });
        }
    }
    Err(Error::ReferenceNotConverged {
        residual: primal.max(dual).to_f64_lossy(),
        iters: settings.max_iter,
    })
}

/// Both sides of the averaged-iterate bound after `iterations` steps.
#[derive(Clone, Debug)]
pub struct BoundCheckpoint<T> {
    pub iterations: usize,
    pub objective_gap: T,
    pub feasibility: T,
    /// `f(u_bar) - f(u*) + rho ||F w_bar - v_bar||`
    pub lhs: T,
    /// `(1/T) sum_t (1/eta) (B_t(w_t, w*) - B_t(w_{t+1}, w*))`
    pub bregman_term: T,
    /// `(eta / 2T) sum_t ||g_t||^2_{H_t^*}`
    pub gradient_term: T,
    /// `beta ||v*||^2 / 2T`
    pub comparator_term: T,
    /// `rho^2 / (2 T beta)`
    pub rho_term: T,
    pub rhs: T,
    pub margin: T,
}

impl<T: Scalar> BoundCheckpoint<T> {
    pub fn passed(&self, tol: T) -> bool {
        self.lhs <= self.rhs + tol
    }
}

impl<T: Scalar> fmt::Display for BoundCheckpoint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "T={}: lhs {:.15e} <= rhs {:.15e} (margin {:.15e})",
            self.iterations, self.lhs, self.rhs, self.margin
        )
    }
}

#[derive(Clone, Debug)]
pub struct BoundReport<T> {
    pub policy: PolicyKind,
    pub eta: T,
    pub rho: T,
    pub reference_objective: T,
    pub checkpoints: Vec<BoundCheckpoint<T>>,
}

impl<T: Scalar> BoundReport<T> {
    pub fn passed(&self, tol: T) -> bool {
        self.checkpoints.iter().all(|c| c.passed(tol))
    }
}

impl<T: Scalar> fmt::Display for BoundReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} eta={} rho={} f(u*)={:.15e}",
            self.policy, self.eta, self.rho, self.reference_objective
        )?;
        for c in &self.checkpoints {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

/// Runs the solver with exact full gradients and a constant step, and
/// evaluates the averaged-iterate bound against the comparator
/// `(w*, F w*)` at each requested iteration count.
pub fn check_theorem1_bound<T: Scalar>(
    data: &Dataset<T>,
    graph: &GraphIncidence<T>,
    params: &GgsvmParams<T>,
    cfg: &RunConfig<T>,
    policy: PolicyKind,
    reference: &ReferenceOptimum<T>,
    checkpoints: &[usize],
) -> Result<BoundReport<T>> {
    cfg.validate()?;
    check_dim(data.dim(), graph.dim())?;
    check_dim(data.dim(), reference.w.len())?;
    let StepSize::Constant(eta) = cfg.step else {
        return Err(Error::invalid("step", "the bound check needs a constant step size"));
    };
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    if last == 0 {
        return Err(Error::invalid("checkpoints", "need at least one positive iteration count"));
    }
    let w_star = &reference.w;
    let v_star = graph.apply(w_star);
    let f_star = objective(w_star, &v_star, data, params);
    let (beta, rho) = (cfg.beta, cfg.rho);

    let mut state = SolverState::new(data.dim(), graph.num_edges(), policy, cfg);
    let mut bregman_sum = T::zero();
    let mut dual_sum = T::zero();
    let mut out = Vec::new();
    let half = T::lit(0.5);

    for t in 1..=last {
        let g = full_gradient(&state.w, data, params);
        let before = state.w.sub(w_star);
        state.step(&g, graph, params, cfg)?;
        let after = state.w.sub(w_star);
        // H_t is the metric after the update inside step
        bregman_sum += half * (g_norm_sq(&before, &state.metric)? - g_norm_sq(&after, &state.metric)?);
        dual_sum += dual_norm_sq(&g, &state.metric)?;

        if checkpoints.contains(&t) {
            let avg = state.averaged_iterates()?;
            let tt = T::from_usize_lossy(t);
            let gap = objective(&avg.u_w, &avg.u_v, data, params) - f_star;
            let feas = feasibility(&avg.pair_w, &avg.pair_v, graph);
            let lhs = gap + rho * feas;
            let two_t = T::lit(2.0) * tt;
            let bregman_term = (T::lit(2.0) / eta) * bregman_sum / two_t;
            let gradient_term = eta * dual_sum / two_t;
            let comparator_term = beta * v_star.norm_sq() / two_t;
            let rho_term = rho * rho / (beta * two_t);
            let rhs = bregman_term + gradient_term + comparator_term + rho_term;
            out.push(BoundCheckpoint {
                iterations: t,
                objective_gap: gap,
                feasibility: feas,
                lhs,
                bregman_term,
                gradient_term,
                comparator_term,
                rho_term,
                rhs,
                margin: lhs - rhs,
            });
        }
    }
    Ok(BoundReport {
        policy,
        eta,
        rho,
        reference_objective: f_star,
        checkpoints: out,
    })
}

/// A small seeded instance: `n` Gaussian samples in `d` dimensions labelled
/// by a noisy linear rule, with a chain graph `(0,1), (1,2), ...` of
/// `edges` unit-weight edges.
pub fn synthetic_instance<T: Scalar>(
    d: usize,
    n: usize,
    edges: usize,
    seed: u64,
) -> Result<(Dataset<T>, GraphIncidence<T>)> {
    if edges >= d.max(1) {
        return Err(Error::invalid("edges", format!("a chain on {d} nodes has at most {} edges", d.saturating_sub(1))));
    }
    let mut rng = Prng::seeded(seed);
    let truth: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let samples = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let score: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.5 * rng.normal();
            let label = if score >= 0.0 { Label::Positive } else { Label::Negative };
            let xt: Vec<T> = x.into_iter().map(T::lit).collect();
            Sample::new(SparseVector::from_dense(&xt), label)
        })
        .collect();
    let data = Dataset::new(samples, d)?;
    let graph = GraphIncidence::new(
        d,
        (0..edges)
            .map(|i| Edge {
                i,
                j: i + 1,
                weight: T::one(),
            })
            .collect(),
    )?;
    Ok((data, graph))
}

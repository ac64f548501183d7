//! Adaptive stochastic ADMM.
//!
//! One iteration, starting from `(w_t, v_t, theta_t)`:
//!
//! 1. draw `xi_t` and compute `g_t = l'(w_t, xi_t)` (or the full gradient);
//! 2. update the metric to `H_t`;
//! 3. `w_{t+1}` solves `(beta F^T F + H_t/eta) w = H_t w_t/eta - g_t + F^T theta_t + beta F^T v_t`;
//! 4. `v_{t+1} = S_{nu/beta}(F w_{t+1} - theta_t/beta)`;
//! 5. `theta_{t+1} = theta_t - beta (F w_{t+1} - v_{t+1})`.
//!
//! `W` and `V` are the whole space, so the argmin steps need no projection.

mod metric;

use std::time::Instant;

pub use metric::{MetricPolicy, PolicyKind};

use crate::data::MetricsRecord;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    cg_solve, dual_norm_sq, soft_threshold, CgSettings, Cholesky, DenseVector, Metric,
    SymmetricMatrix, DEFAULT_CLAMP_TOL,
};
use crate::problem::{
    feasibility, full_gradient, objective, stochastic_subgradient, test_error, Dataset,
    GgsvmParams, GraphIncidence,
};
use crate::rng::Prng;
use crate::Scalar;

/// Step size `eta_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize<T> {
    Constant(T),
    /// `eta_t = 1 / (gamma t)`.
    InverseRidge,
}

impl<T: Scalar> StepSize<T> {
    pub fn eta_at(&self, t: usize, gamma: T) -> T {
        match *self {
            StepSize::Constant(eta) => eta,
            StepSize::InverseRidge => T::one() / (gamma * T::from_usize_lossy(t)),
        }
    }

    /// `eta = D_inf / sqrt(2)` for a user-supplied ℓ∞ diameter of `W`.
    pub fn diag_preset(d_inf: T) -> Self {
        StepSize::Constant(d_inf / T::lit(2.0).sqrt())
    }

    /// `eta = D_2 / 2` for a user-supplied ℓ2 diameter of `W`.
    pub fn full_preset(d_2: T) -> Self {
        StepSize::Constant(d_2 / T::lit(2.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig<T> {
    /// Augmented-Lagrangian penalty `beta`.
    pub beta: T,
    pub step: StepSize<T>,
    /// Metric smoothing `a` in `H_t = a I + ...`.
    pub a: T,
    pub epochs: f64,
    pub seed: u64,
    /// Evaluate every this many iterations; 0 picks a quarter epoch.
    pub eval_every: usize,
    /// Use the exact empirical gradient instead of one sampled example.
    pub deterministic_full_gradient: bool,
    /// Feasibility weight used by the diagnostics.
    pub rho: T,
    pub cg_tol: T,
    /// Problems up to this dimension use a dense Cholesky solve for `w`.
    pub direct_solve_max_dim: usize,
    pub clamp_tol: T,
    /// Accumulate `sum_t ||g_t||^2_{H_t^*}` and the gradient statistics.
    pub log_gradients: bool,
    /// Record wall-clock time in the metrics (0 otherwise).
    pub wall_time: bool,
}

impl<T: Scalar> Default for RunConfig<T> {
    fn default() -> Self {
        Self {
            beta: T::one(),
            step: StepSize::Constant(T::one()),
            a: T::one(),
            epochs: 2.0,
            seed: 0,
            eval_every: 0,
            deterministic_full_gradient: false,
            rho: T::one(),
            cg_tol: T::lit(1e-10),
            direct_solve_max_dim: 64,
            clamp_tol: T::lit(DEFAULT_CLAMP_TOL),
            log_gradients: false,
            wall_time: true,
        }
    }
}

impl<T: Scalar> RunConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: T| x > T::zero() && x.is_finite();
        if !positive(self.beta) {
            return Err(Error::invalid("config", format!("beta = {} must be positive", self.beta)));
        }
        if !positive(self.a) {
            return Err(Error::invalid("config", format!("a = {} must be positive", self.a)));
        }
        if let StepSize::Constant(eta) = self.step {
            if !positive(eta) {
                return Err(Error::invalid("config", format!("eta = {eta} must be positive")));
            }
        }
        if !(self.epochs > 0.0 && self.epochs.is_finite()) {
            return Err(Error::invalid("config", format!("epochs = {} must be positive", self.epochs)));
        }
        if !positive(self.rho) {
            return Err(Error::invalid("config", format!("rho = {} must be positive", self.rho)));
        }
        Ok(())
    }

    /// `T = ceil(epochs * n)`
    pub fn iterations(&self, n: usize) -> usize {
        ((self.epochs * n as f64).ceil() as usize).max(1)
    }
}

/// Outcome of the `w` subproblem solve.
#[derive(Clone, Debug)]
pub struct WStep<T> {
    pub w: DenseVector<T>,
    /// `(iterations, relative residual, converged)` when CG was used.
    pub cg: Option<(usize, T, bool)>,
}

/// Right-hand side `H_t w_t / eta - g + F^T theta + beta F^T v`.
fn w_rhs<T: Scalar>(
    w_t: &[T],
    v_t: &[T],
    theta_t: &[T],
    g: &[T],
    metric: &MetricPolicy<T>,
    graph: &GraphIncidence<T>,
    beta: T,
    eta: T,
) -> DenseVector<T> {
    let mut rhs = metric.apply(w_t);
    let inv_eta = T::one() / eta;
    for (r, &gi) in rhs.iter_mut().zip(g) {
        *r = *r * inv_eta - gi;
    }
    graph.apply_transpose_add(T::one(), theta_t, &mut rhs);
    graph.apply_transpose_add(beta, v_t, &mut rhs);
    rhs
}

/// Minimizer over `w` of
/// `<g, w> - <theta_t, F w - v_t> + (beta/2) ||F w - v_t||^2 + ||w - w_t||^2_{H_t} / (2 eta)`.
#[allow(clippy::too_many_arguments)]
pub fn step_w<T: Scalar>(
    w_t: &[T],
    v_t: &[T],
    theta_t: &[T],
    g: &[T],
    metric: &MetricPolicy<T>,
    graph: &GraphIncidence<T>,
    beta: T,
    eta: T,
    cg_tol: T,
    direct_solve_max_dim: usize,
) -> Result<WStep<T>> {
    let d = graph.dim();
    check_dim(d, w_t.len())?;
    check_dim(d, g.len())?;
    check_dim(graph.num_edges(), v_t.len())?;
    check_dim(graph.num_edges(), theta_t.len())?;
    let rhs = w_rhs(w_t, v_t, theta_t, g, metric, graph, beta, eta);
    let inv_eta = T::one() / eta;

    if d <= direct_solve_max_dim {
        let mut k = metric.to_matrix().scaled(inv_eta);
        k.add_scaled(beta, graph.gram());
        let w = Cholesky::factor(&k)?.solve(&rhs);
        return Ok(WStep { w, cg: None });
    }

    let settings = CgSettings {
        tol: cg_tol,
        max_iter: 10 * d,
    };
    let diag = metric.diagonal();
    let out = cg_solve(
        |x, y| {
            match &diag {
                Some(h) => {
                    for ((yi, &hi), &xi) in y.iter_mut().zip(h.iter()).zip(x) {
                        *yi = hi * inv_eta * xi;
                    }
                }
                None => {
                    metric.apply_into(x, y);
                    y.iter_mut().for_each(|v| *v *= inv_eta);
                }
            }
            graph.gram_apply_add(beta, x, y);
        },
        &rhs,
        w_t,
        settings,
    );
    Ok(WStep {
        cg: Some((out.iterations, out.relative_residual, out.converged)),
        w: out.x,
    })
}

/// Gradient of the `w` subproblem objective at `w`; zero at the exact minimizer.
#[allow(clippy::too_many_arguments)]
pub fn w_subproblem_gradient<T: Scalar>(
    w: &[T],
    w_t: &[T],
    v_t: &[T],
    theta_t: &[T],
    g: &[T],
    metric: &MetricPolicy<T>,
    graph: &GraphIncidence<T>,
    beta: T,
    eta: T,
) -> DenseVector<T> {
    // g - F^T theta + beta F^T (F w - v) + H (w - w_t) / eta
    let diff: DenseVector<T> = w.iter().zip(w_t).map(|(&a, &b)| a - b).collect();
    let mut out = metric.apply(&diff);
    out.iter_mut().for_each(|x| *x /= eta);
    for (o, &gi) in out.iter_mut().zip(g) {
        *o += gi;
    }
    graph.apply_transpose_add(-T::one(), theta_t, &mut out);
    let fw = graph.apply(w);
    let r: Vec<T> = fw.iter().zip(v_t).map(|(&a, &b)| a - b).collect();
    graph.apply_transpose_add(beta, &r, &mut out);
    out
}

/// `S_{nu/beta}(F w_{t+1} - theta_t / beta)`, the exact `v` minimizer for `phi = nu ||.||_1`.
pub fn step_v<T: Scalar>(
    w_next: &[T],
    theta: &[T],
    graph: &GraphIncidence<T>,
    nu: T,
    beta: T,
) -> DenseVector<T> {
    let fw = graph.apply(w_next);
    let z: Vec<T> = fw.iter().zip(theta).map(|(&a, &t)| a - t / beta).collect();
    soft_threshold(&z, nu / beta)
}

/// `theta - beta (F w_{t+1} - v_{t+1})`
pub fn step_theta<T: Scalar>(
    theta: &[T],
    w_next: &[T],
    v_next: &[T],
    graph: &GraphIncidence<T>,
    beta: T,
) -> DenseVector<T> {
    let fw = graph.apply(w_next);
    theta
        .iter()
        .zip(fw.iter().zip(v_next))
        .map(|(&t, (&a, &b))| t - beta * (a - b))
        .collect()
}

/// Gradient statistics needed by the inequality checks.
#[derive(Clone, Debug)]
pub struct GradientLog<T> {
    pub steps: usize,
    /// `sum_t g_t^T H_t^{-1} g_t`
    pub dual_norm_sum: T,
    /// Per-coordinate `sum_t g_{t,i}^2`.
    pub column_sq: DenseVector<T>,
    /// `G_T` for the full policy.
    pub gram: Option<SymmetricMatrix<T>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CgWarnings<T> {
    pub unconverged_steps: usize,
    pub worst_residual: T,
}

/// Iterates `(w_t, v_t, theta_t)`, the metric and the averaging sums.
#[derive(Clone, Debug)]
pub struct SolverState<T> {
    pub w: DenseVector<T>,
    pub v: DenseVector<T>,
    pub theta: DenseVector<T>,
    /// Index of the current iterate (starts at 1).
    pub t: usize,
    pub metric: MetricPolicy<T>,
    sum_w_from1: DenseVector<T>,
    sum_w_from2: DenseVector<T>,
    sum_v_from2: DenseVector<T>,
    sum_theta_from2: DenseVector<T>,
    pub gradient_log: Option<GradientLog<T>>,
    pub cg_warnings: CgWarnings<T>,
}

/// Averages defined over a run of `T` iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedIterates<T> {
    pub iterations: usize,
    /// `(1/T) sum_{t=1}^{T} w_t`
    pub u_w: DenseVector<T>,
    /// `(1/T) sum_{t=2}^{T+1} v_t`
    pub u_v: DenseVector<T>,
    /// `(1/T) sum_{t=2}^{T+1} w_t`
    pub pair_w: DenseVector<T>,
    /// `(1/T) sum_{t=2}^{T+1} v_t`
    pub pair_v: DenseVector<T>,
    /// `(1/T) sum_{t=2}^{T+1} theta_t`
    pub theta: DenseVector<T>,
}

impl<T: Scalar> SolverState<T> {
    /// `w_1 = 0, v_1 = 0, theta_1 = 0, H_1 = a I`.
    pub fn new(dim: usize, num_edges: usize, kind: PolicyKind, cfg: &RunConfig<T>) -> Self {
        Self {
            w: DenseVector::zeros(dim),
            v: DenseVector::zeros(num_edges),
            theta: DenseVector::zeros(num_edges),
            t: 1,
            metric: MetricPolicy::new(kind, dim, cfg.a, cfg.clamp_tol),
            sum_w_from1: DenseVector::zeros(dim),
            sum_w_from2: DenseVector::zeros(dim),
            sum_v_from2: DenseVector::zeros(num_edges),
            sum_theta_from2: DenseVector::zeros(num_edges),
            gradient_log: cfg.log_gradients.then(|| GradientLog {
                steps: 0,
                dual_norm_sum: T::zero(),
                column_sq: DenseVector::zeros(dim),
                gram: (kind == PolicyKind::Full).then(|| SymmetricMatrix::zeros(dim)),
            }),
            cg_warnings: CgWarnings::default(),
        }
    }

    /// Number of completed iterations.
    pub fn completed(&self) -> usize {
        self.t - 1
    }

    /// One iteration driven by the gradient `g = l'(w_t, xi_t)`.
    pub fn step(
        &mut self,
        g: &[T],
        graph: &GraphIncidence<T>,
        params: &GgsvmParams<T>,
        cfg: &RunConfig<T>,
    ) -> Result<()> {
        let eta = cfg.step.eta_at(self.t, params.gamma);
        self.sum_w_from1.axpy(T::one(), &self.w);

        self.metric.update(g)?;
        if let Some(log) = &mut self.gradient_log {
            log.dual_norm_sum += dual_norm_sq(g, &self.metric)?;
            for (c, &gi) in log.column_sq.iter_mut().zip(g) {
                *c += gi * gi;
            }
            if let Some(gram) = &mut log.gram {
                gram.add_rank1(T::one(), g);
            }
            log.steps += 1;
        }

        let ws = step_w(
            &self.w,
            &self.v,
            &self.theta,
            g,
            &self.metric,
            graph,
            cfg.beta,
            eta,
            cfg.cg_tol,
            cfg.direct_solve_max_dim,
        )?;
        if let Some((_, res, false)) = ws.cg {
            self.cg_warnings.unconverged_steps += 1;
            self.cg_warnings.worst_residual = self.cg_warnings.worst_residual.max(res);
        }
        let w_next = ws.w;
        let v_next = step_v(&w_next, &self.theta, graph, params.nu, cfg.beta);
        let theta_next = step_theta(&self.theta, &w_next, &v_next, graph, cfg.beta);

        if !(w_next.is_finite() && v_next.is_finite() && theta_next.is_finite()) {
            return Err(Error::Diverged {
                iter: self.t,
                detail: format!(
                    "eta = {eta}, ||g|| = {}, ||w_t|| = {}",
                    crate::linalg::vector_dot(g, g).sqrt(),
                    self.w.norm()
                ),
            });
        }

        self.sum_w_from2.axpy(T::one(), &w_next);
        self.sum_v_from2.axpy(T::one(), &v_next);
        self.sum_theta_from2.axpy(T::one(), &theta_next);
        self.w = w_next;
        self.v = v_next;
        self.theta = theta_next;
        self.t += 1;
        Ok(())
    }

    pub fn averaged_iterates(&self) -> Result<AveragedIterates<T>> {
        let n = self.completed();
        if n == 0 {
            return Err(Error::invalid("averaged iterates", "no iterations completed"));
        }
        let inv = T::one() / T::from_usize_lossy(n);
        Ok(AveragedIterates {
            iterations: n,
            u_w: self.sum_w_from1.scaled(inv),
            u_v: self.sum_v_from2.scaled(inv),
            pair_w: self.sum_w_from2.scaled(inv),
            pair_v: self.sum_v_from2.scaled(inv),
            theta: self.sum_theta_from2.scaled(inv),
        })
    }
}

/// Everything a finished run produces.
#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub state: SolverState<T>,
    pub records: Vec<MetricsRecord<T>>,
    pub policy: PolicyKind,
}

impl<T: Scalar> RunOutput<T> {
    pub fn final_record(&self) -> &MetricsRecord<T> {
        self.records.last().expect("run emits at least one record")
    }
}

fn evaluate<T: Scalar>(
    state: &SolverState<T>,
    train: &Dataset<T>,
    test: &Dataset<T>,
    graph: &GraphIncidence<T>,
    params: &GgsvmParams<T>,
    wall: f64,
) -> Result<MetricsRecord<T>> {
    let avg = state.averaged_iterates()?;
    let iter = state.completed();
    Ok(MetricsRecord {
        iter,
        epoch: iter as f64 / train.len() as f64,
        objective_avg: objective(&avg.u_w, &avg.u_v, train, params),
        objective_last: objective(&state.w, &state.v, train, params),
        test_error_avg: test_error(&avg.u_w, test),
        test_error_last: test_error(&state.w, test),
        feasibility_avg: feasibility(&avg.pair_w, &avg.pair_v, graph),
        wall_time_s: wall,
    })
}

/// Runs `T = ceil(epochs * n)` iterations from the zero initialization.
pub fn run<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    graph: &GraphIncidence<T>,
    params: &GgsvmParams<T>,
    cfg: &RunConfig<T>,
    kind: PolicyKind,
) -> Result<RunOutput<T>> {
    cfg.validate()?;
    check_dim(train.dim(), graph.dim())?;
    check_dim(train.dim(), test.dim())?;
    let n = train.len();
    let total = cfg.iterations(n);
    let eval_every = if cfg.eval_every == 0 {
        (n / 4).max(1)
    } else {
        cfg.eval_every
    };

    let mut state = SolverState::new(train.dim(), graph.num_edges(), kind, cfg);
    let mut rng = Prng::seeded(cfg.seed);
    let mut records = Vec::new();
    let mut elapsed = 0.0;

    for t in 1..=total {
        let started = cfg.wall_time.then(Instant::now);
        let g = if cfg.deterministic_full_gradient {
            full_gradient(&state.w, train, params)
        } else {
            stochastic_subgradient(&state.w, train.sample(rng.index(n)), params)
        };
        state.step(&g, graph, params, cfg)?;
        if let Some(s) = started {
            elapsed += s.elapsed().as_secs_f64();
        }
        if t % eval_every == 0 || t == total {
            records.push(evaluate(&state, train, test, graph, params, elapsed)?);
        }
    }

    Ok(RunOutput {
        state,
        records,
        policy: kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseVector;
    use crate::problem::{Edge, Label, Sample};

    fn tiny() -> (Dataset<f64>, GgsvmParams<f64>) {
        let s = |i: Vec<usize>, v: Vec<f64>, p| {
            Sample::new(
                SparseVector::new(3, i, v).unwrap(),
                if p { Label::Positive } else { Label::Negative },
            )
        };
        let data = Dataset::new(
            vec![s(vec![0, 1], vec![1.0, 0.5], true), s(vec![2], vec![-1.0], false)],
            3,
        )
        .unwrap();
        (data, GgsvmParams::new(0.5, 0.5).unwrap())
    }

    #[test]
    fn edgeless_w_step_is_mirror_descent() {
        let graph = GraphIncidence::<f64>::empty(3);
        let mut metric = MetricPolicy::new(PolicyKind::Diagonal, 3, 1.0, 1e-10);
        let g = [1.0, -2.0, 0.5];
        metric.update(&g).unwrap();
        let w_t = [0.1, 0.2, 0.3];
        let eta = 0.7;
        let out = step_w(&w_t, &[], &[], &g, &metric, &graph, 1.0, eta, 1e-12, 64).unwrap();
        let hinv_g = metric.solve(&g).unwrap();
        for i in 0..3 {
            assert!((out.w[i] - (w_t[i] - eta * hinv_g[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_unit_step() {
        let graph = GraphIncidence::<f64>::empty(2);
        let metric = MetricPolicy::new(PolicyKind::Identity, 2, 1.0, 1e-10);
        let out = step_w(&[1.0, 1.0], &[], &[], &[0.25, -0.5], &metric, &graph, 1.0, 1.0, 1e-12, 64).unwrap();
        assert_eq!(out.w.as_slice(), &[0.75, 1.5]);
    }

    #[test]
    fn cg_path_matches_direct_path() {
        let graph = GraphIncidence::new(
            3,
            vec![Edge { i: 0, j: 1, weight: 1.0 }, Edge { i: 1, j: 2, weight: -2.0 }],
        )
        .unwrap();
        for kind in PolicyKind::ALL {
            let mut metric = MetricPolicy::<f64>::new(kind, 3, 1.0, 1e-10);
            metric.update(&[0.3, -1.0, 2.0]).unwrap();
            metric.update(&[1.0, 0.2, -0.4]).unwrap();
            let args = ([0.1, -0.2, 0.3], [0.5, -0.1], [0.2, 0.3], [1.0, -1.0, 0.5]);
            let direct = step_w(&args.0, &args.1, &args.2, &args.3, &metric, &graph, 1.5, 0.8, 1e-13, 64).unwrap();
            let cg = step_w(&args.0, &args.1, &args.2, &args.3, &metric, &graph, 1.5, 0.8, 1e-13, 0).unwrap();
            assert!(cg.cg.unwrap().2);
            for i in 0..3 {
                assert!((direct.w[i] - cg.w[i]).abs() < 1e-11, "{kind}");
            }
            let grad = w_subproblem_gradient(&direct.w, &args.0, &args.1, &args.2, &args.3, &metric, &graph, 1.5, 0.8);
            assert!(grad.norm() < 1e-12);
        }
    }

    #[test]
    fn v_and_theta_examples() {
        let graph = GraphIncidence::new(2, vec![Edge { i: 0, j: 1, weight: 1.0 }]).unwrap();
        let w = [3.0, 1.0];
        // F w = 2 = theta / beta
        assert_eq!(step_v(&w, &[4.0], &graph, 0.3, 2.0).as_slice(), &[0.0]);
        assert_eq!(step_v(&w, &[1.0], &graph, 0.0, 2.0).as_slice(), &[1.5]);
        assert_eq!(step_theta(&[0.7], &w, &[2.0], &graph, 1.0).as_slice(), &[0.7]);
        assert_eq!(step_theta(&[0.0], &w, &[0.5], &graph, 1.0).as_slice(), &[-1.5]);
    }

    #[test]
    fn single_identity_step_from_zero() {
        let (data, params) = tiny();
        let graph = GraphIncidence::empty(3);
        let cfg = RunConfig {
            epochs: 0.5,
            wall_time: false,
            ..RunConfig::default()
        };
        let out = run(&data, &data, &graph, &params, &cfg, PolicyKind::Identity).unwrap();
        assert_eq!(out.state.completed(), 1);
        // whichever sample was drawn, w_2 = -g_1 at w = 0
        let cands: Vec<DenseVector<f64>> = data
            .samples()
            .iter()
            .map(|s| stochastic_subgradient(&[0.0; 3], s, &params).scaled(-1.0))
            .collect();
        assert!(cands.contains(&out.state.w));
        let avg = out.state.averaged_iterates().unwrap();
        assert_eq!(avg.u_w.as_slice(), &[0.0; 3]);
        assert_eq!(avg.u_v, out.state.v);
    }

    #[test]
    fn averages_start_empty() {
        let cfg = RunConfig::<f64>::default();
        let st = SolverState::new(2, 0, PolicyKind::Diagonal, &cfg);
        assert!(st.averaged_iterates().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = RunConfig::<f64>::default();
        assert!(cfg.validate().is_ok());
        cfg.beta = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::<f64> {
            step: StepSize::Constant(-1.0),
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(cfg.iterations(10), 20);
    }

    #[test]
    fn presets_and_schedule() {
        assert_eq!(StepSize::<f64>::InverseRidge.eta_at(4, 0.5), 0.5);
        match StepSize::diag_preset(2.0f64) {
            StepSize::Constant(e) => assert!((e - 2.0f64.sqrt()).abs() < 1e-15),
            _ => unreachable!(),
        }
        assert_eq!(StepSize::full_preset(3.0f64), StepSize::Constant(1.5));
    }
}

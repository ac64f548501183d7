use std::io::BufReader;

use adasadmm::data::{parse_libsvm, read_libsvm, GraphHeuristic};
use adasadmm::diagnostics::{check_theorem1_bound, reference_optimum, ReferenceSettings};
use adasadmm::harness::{
    grid_search_eta, run_experiment, synthetic_dataset, GraphSource, Problem,
};
use adasadmm::linalg::{cg_solve, dual_norm_sq, g_norm_sq, CgSettings, SparseVector, SymmetricMatrix};
use adasadmm::problem::{
    empirical_loss, feasibility, full_gradient, objective, test_error, Dataset, Edge,
    GgsvmParams, GraphIncidence, Label, Sample,
};
use adasadmm::rng::Prng;
use adasadmm::solver::{run, PolicyKind, RunConfig, StepSize};
use nalgebra::{DMatrix, DVector};

fn random_matrix(rng: &mut Prng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.normal())
}

fn to_sym(m: &DMatrix<f64>) -> SymmetricMatrix<f64> {
    SymmetricMatrix::from_upper_fn(m.nrows(), |i, j| m[(i, j)])
}

fn dense_x(data: &Dataset<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(data.len(), data.dim(), |i, j| data.sample(i).features.to_dense()[j]);
    let y = DVector::from_fn(data.len(), |i, _| data.sample(i).label.sign::<f64>());
    (x, y)
}

fn dense_f(graph: &GraphIncidence<f64>) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(graph.num_edges(), graph.dim());
    for (k, e) in graph.edges().iter().enumerate() {
        f[(k, e.i)] = e.weight;
        f[(k, e.j)] = -e.weight;
    }
    f
}

fn sample(x: &[f64], positive: bool) -> Sample<f64> {
    Sample::new(
        SparseVector::from_dense(x),
        if positive { Label::Positive } else { Label::Negative },
    )
}

#[test]
fn g_norm_matches_factor_and_dual_matches_inverse() {
    let mut rng = Prng::seeded(11);
    for d in [1, 2, 5, 13] {
        let l = random_matrix(&mut rng, d, d) + DMatrix::identity(d, d) * 3.0;
        let l = l.lower_triangle();
        let h = &l * l.transpose();
        let hs = to_sym(&h);
        let w = DVector::from_fn(d, |_, _| rng.normal());
        let expect = (l.transpose() * &w).norm_squared();
        let got = g_norm_sq(w.as_slice(), &hs).unwrap();
        assert!((got - expect).abs() <= 1e-10 * expect, "{got} {expect}");

        let inv = h.clone().try_inverse().unwrap();
        let expect = (w.transpose() * &inv * &w)[(0, 0)];
        let got = dual_norm_sq(w.as_slice(), &hs).unwrap();
        assert!((got - expect).abs() <= 1e-9 * expect, "{got} {expect}");
    }
}

#[test]
fn cg_matches_lu_on_20x20() {
    let mut rng = Prng::seeded(20);
    let b = random_matrix(&mut rng, 20, 20);
    let a = &b * b.transpose() + DMatrix::identity(20, 20);
    let rhs = DVector::from_fn(20, |_, _| rng.normal());
    let expect = a.clone().lu().solve(&rhs).unwrap();
    let out = cg_solve(
        |x, y| y.copy_from_slice((&a * DVector::from_column_slice(x)).as_slice()),
        rhs.as_slice(),
        &[0.0; 20],
        CgSettings { tol: 1e-12, max_iter: 400 },
    );
    assert!(out.converged);
    let err = (DVector::from_column_slice(&out.x) - &expect).norm() / expect.norm();
    assert!(err < 1e-9, "{err}");
}

#[test]
fn full_gradient_matches_finite_differences() {
    let data: Dataset<f64> = synthetic_dataset(40, 6, 0.1, 3).unwrap();
    let p = GgsvmParams::new(0.3, 0.1).unwrap();
    let mut rng = Prng::seeded(4);
    for _ in 0..10 {
        let w: Vec<f64> = (0..6).map(|_| 0.3 * rng.normal()).collect();
        let dir: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let h = 1e-7;
        let shift = |s: f64| -> Vec<f64> { w.iter().zip(&dir).map(|(a, b)| a + s * b).collect() };
        // the loss is piecewise quadratic; skip points where a kink sits within the stencil
        let margins_cross = data.samples().iter().any(|s| {
            let m = |v: &[f64]| s.margin(v) - 1.0;
            m(&shift(-h)).signum() != m(&shift(h)).signum()
        });
        if margins_cross {
            continue;
        }
        let fd = (empirical_loss(&shift(h), &data, &p) - empirical_loss(&shift(-h), &data, &p)) / (2.0 * h);
        let g = full_gradient(&w, &data, &p);
        let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!((fd - analytic).abs() < 1e-6 * (1.0 + analytic.abs()), "{fd} {analytic}");
    }
}

#[test]
fn evaluation_metrics_match_dense_recomputation() {
    let data: Dataset<f64> = synthetic_dataset(30, 5, 0.2, 8).unwrap();
    let graph = GraphIncidence::new(
        5,
        vec![Edge { i: 0, j: 3, weight: 0.5 }, Edge { i: 1, j: 2, weight: 2.0 }],
    )
    .unwrap();
    let p = GgsvmParams::new(0.05, 0.2).unwrap();
    let (x, y) = dense_x(&data);
    let f = dense_f(&graph);
    let mut rng = Prng::seeded(9);
    for _ in 0..20 {
        let w = DVector::from_fn(5, |_, _| rng.normal());
        let v = DVector::from_fn(2, |_, _| rng.normal());
        let scores = &x * &w;
        let hinge: f64 = scores.iter().zip(y.iter()).map(|(s, l)| (1.0 - s * l).max(0.0)).sum::<f64>() / 30.0;
        let expect = hinge + 0.025 * w.norm_squared() + 0.2 * v.lp_norm(1);
        let got = objective(w.as_slice(), v.as_slice(), &data, &p);
        assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0));

        let expect = (&f * &w - &v).norm();
        assert!((feasibility(w.as_slice(), v.as_slice(), &graph) - expect).abs() < 1e-12 * expect.max(1.0));

        let wrong = scores
            .iter()
            .zip(y.iter())
            .filter(|(s, l)| (if **s >= 0.0 { 1.0 } else { -1.0 }) != **l)
            .count();
        assert_eq!(test_error(w.as_slice(), &data), wrong as f64 / 30.0);
    }
}

/// Dense re-derivation of the iteration with the exact empirical gradient.
fn dense_trace(
    data: &Dataset<f64>,
    graph: &GraphIncidence<f64>,
    p: &GgsvmParams<f64>,
    kind: PolicyKind,
    beta: f64,
    eta: f64,
    a: f64,
    steps: usize,
) -> Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let (x, y) = dense_x(data);
    let f = dense_f(graph);
    let (d, m, n) = (data.dim(), graph.num_edges(), data.len() as f64);
    let mut w = DVector::zeros(d);
    let mut v = DVector::zeros(m);
    let mut theta = DVector::zeros(m);
    let mut gram = DMatrix::zeros(d, d);
    let mut out = vec![(w.clone(), v.clone(), theta.clone())];
    for _ in 0..steps {
        let scores = &x * &w;
        let mut g = &w * p.gamma;
        for i in 0..data.len() {
            if y[i] * scores[i] < 1.0 {
                g -= x.row(i).transpose() * (y[i] / n);
            }
        }
        gram += &g * g.transpose();
        let h = match kind {
            PolicyKind::Identity => DMatrix::identity(d, d),
            PolicyKind::Diagonal => {
                DMatrix::from_diagonal(&gram.diagonal().map(|s| a + s.sqrt()))
            }
            PolicyKind::Full => {
                let e = gram.clone().symmetric_eigen();
                let s = e.eigenvalues.map(|l| if l > 1e-10 * gram.norm() { l.sqrt() } else { 0.0 });
                DMatrix::identity(d, d) * a + &e.eigenvectors * DMatrix::from_diagonal(&s) * e.eigenvectors.transpose()
            }
        };
        let lhs = f.transpose() * &f * beta + &h / eta;
        let rhs = &h * &w / eta - &g + f.transpose() * &theta + f.transpose() * &v * beta;
        w = lhs.lu().solve(&rhs).unwrap();
        let z = &f * &w - &theta / beta;
        v = z.map(|zi| zi.signum() * (zi.abs() - p.nu / beta).max(0.0));
        theta -= (&f * &w - &v) * beta;
        out.push((w.clone(), v.clone(), theta.clone()));
    }
    out
}

#[test]
fn deterministic_run_matches_dense_trace() {
    let data = Dataset::new(vec![sample(&[1.0, 0.5], true), sample(&[-0.3, 2.0], false)], 2).unwrap();
    let graph = GraphIncidence::new(2, vec![Edge { i: 0, j: 1, weight: 1.5 }]).unwrap();
    let p = GgsvmParams::new(0.5, 0.5).unwrap();
    for kind in PolicyKind::ALL {
        let cfg = RunConfig {
            beta: 0.8,
            step: StepSize::Constant(0.6),
            a: 1.2,
            epochs: 1.5,
            eval_every: 1,
            deterministic_full_gradient: true,
            wall_time: false,
            ..RunConfig::default()
        };
        let out = run(&data, &data, &graph, &p, &cfg, kind).unwrap();
        assert_eq!(out.state.completed(), 3);
        let trace = dense_trace(&data, &graph, &p, kind, 0.8, 0.6, 1.2, 3);
        let (w, v, theta) = &trace[3];
        let close = |a: &[f64], b: &DVector<f64>| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&out.state.w, w), "{kind}: {:?} vs {w}", out.state.w);
        assert!(close(&out.state.v, v), "{kind}");
        assert!(close(&out.state.theta, theta), "{kind}");

        // averages over t = 1..3 and t = 2..4
        let avg = out.state.averaged_iterates().unwrap();
        let u_w = (&trace[0].0 + &trace[1].0 + &trace[2].0) / 3.0;
        let pair_w = (&trace[1].0 + &trace[2].0 + &trace[3].0) / 3.0;
        let pair_v = (&trace[1].1 + &trace[2].1 + &trace[3].1) / 3.0;
        let mean_theta = (&trace[1].2 + &trace[2].2 + &trace[3].2) / 3.0;
        assert!(close(&avg.u_w, &u_w), "{kind}");
        assert!(close(&avg.pair_w, &pair_w), "{kind}");
        assert!(close(&avg.pair_v, &pair_v) && close(&avg.u_v, &pair_v), "{kind}");
        assert!(close(&avg.theta, &mean_theta), "{kind}");

        let rec = out.final_record();
        let expect = objective(u_w.as_slice(), pair_v.as_slice(), &data, &p);
        assert!((rec.objective_avg - expect).abs() < 1e-12);
        assert_eq!(out.records.len(), 3);
    }
}

#[test]
fn grid_prefers_stable_step() {
    let data: Dataset<f64> = synthetic_dataset(200, 6, 0.1, 5).unwrap();
    let graph = GraphHeuristic::default().build(&data).unwrap();
    for kind in PolicyKind::ALL {
        let cfg = RunConfig { epochs: 1.0, ..RunConfig::default() };
        let r = grid_search_eta(&data, &graph, kind, &cfg, &[1e6, 0.5], 0).unwrap();
        assert_eq!(r.best_eta, 0.5, "{kind}: {:?}", r.scores);
        assert_eq!(r.scores[0].0, 0.5);
    }
}

#[test]
fn single_step_bound_matches_closed_form() {
    // one sample x = (0.6, 0.3), y = +1, gamma = nu = 1: w* = x
    let data = Dataset::new(vec![sample(&[0.6, 0.3], true)], 2).unwrap();
    let graph = GraphIncidence::empty(2);
    let p = GgsvmParams::for_sample_count(1).unwrap();
    let reference = reference_optimum(&data, &graph, &p, ReferenceSettings::default()).unwrap();
    assert!((reference.w[0] - 0.6).abs() < 1e-7 && (reference.w[1] - 0.3).abs() < 1e-7);
    let (eta, a, rho, beta) = (0.5, 1.0, 2.0, 1.0);
    let cfg = RunConfig { step: StepSize::Constant(eta), a, rho, beta, ..RunConfig::default() };
    let w_star = reference.w.as_slice();
    let f_star = 1.0 - (0.36 + 0.09) + 0.5 * 0.45;
    assert!((reference.objective - f_star).abs() < 1e-7);

    for kind in [PolicyKind::Diagonal, PolicyKind::Full] {
        let rep = check_theorem1_bound(&data, &graph, &p, &cfg, kind, &reference, &[1]).unwrap();
        let cp = &rep.checkpoints[0];
        // g = -x at w = 0
        let g = [-0.6, -0.3];
        let h = match kind {
            PolicyKind::Diagonal => DMatrix::from_diagonal(&DVector::from_vec(vec![a + 0.6, a + 0.3])),
            _ => {
                let gv = DVector::from_column_slice(&g);
                DMatrix::identity(2, 2) * a + &gv * gv.transpose() / gv.norm()
            }
        };
        let gv = DVector::from_column_slice(&g);
        let w2 = -(h.clone().try_inverse().unwrap() * &gv) * eta;
        let ws = DVector::from_column_slice(w_star);
        let q = |u: &DVector<f64>| 0.5 * (u.transpose() * &h * u)[(0, 0)];
        let bregman = (2.0 / eta) * (q(&ws) - q(&(&w2 - &ws))) / 2.0;
        let grad = eta * (gv.transpose() * h.clone().try_inverse().unwrap() * &gv)[(0, 0)] / 2.0;
        let rho_term = rho * rho / (beta * 2.0);
        assert!((cp.objective_gap - (1.0 - reference.objective)).abs() < 1e-12);
        assert_eq!(cp.feasibility, 0.0);
        assert!((cp.bregman_term - bregman).abs() < 1e-9, "{kind}");
        assert!((cp.gradient_term - grad).abs() < 1e-12, "{kind}");
        assert_eq!(cp.comparator_term, 0.0);
        assert!((cp.rho_term - rho_term).abs() < 1e-15);
        assert!(rep.passed(1e-12));
    }
}

#[test]
fn doubling_rho_adds_exact_term() {
    let (data, graph) = adasadmm::diagnostics::synthetic_instance::<f64>(4, 15, 2, 7).unwrap();
    let p = GgsvmParams::for_sample_count(data.len()).unwrap();
    let reference = reference_optimum(&data, &graph, &p, ReferenceSettings::default()).unwrap();
    let (rho, beta, t) = (0.7, 1.3, 20);
    for kind in [PolicyKind::Diagonal, PolicyKind::Full] {
        let cfg = |rho| RunConfig { rho, beta, step: StepSize::Constant(0.4), ..RunConfig::default() };
        let one = check_theorem1_bound(&data, &graph, &p, &cfg(rho), kind, &reference, &[t]).unwrap();
        let two = check_theorem1_bound(&data, &graph, &p, &cfg(2.0 * rho), kind, &reference, &[t]).unwrap();
        let (a, b) = (&one.checkpoints[0], &two.checkpoints[0]);
        let expect = 3.0 * rho * rho / (2.0 * t as f64 * beta);
        assert!(((b.rhs - a.rhs) - expect).abs() < 1e-12 * (1.0 + a.rhs.abs()));
        assert!(((b.lhs - a.lhs) - rho * a.feasibility).abs() < 1e-12);
    }
}

#[test]
fn experiment_runs_match_sequential_runs() {
    let data: Dataset<f64> = synthetic_dataset(120, 6, 0.1, 6).unwrap();
    let problem = Problem::prepare(&data, &GraphSource::Precision(GraphHeuristic::default()), 0.8, 0, false).unwrap();
    let cfg = RunConfig { seed: 40, wall_time: false, step: StepSize::Constant(0.5), ..RunConfig::default() };
    for kind in PolicyKind::ALL {
        let exp = run_experiment(&problem, kind, &cfg, 4).unwrap();
        let mut finals = Vec::new();
        for r in (0..4u64).rev() {
            let c = RunConfig { seed: 40 + r, ..cfg.clone() };
            let out = run(&problem.train, &problem.test, &problem.graph, &problem.params, &c, kind).unwrap();
            assert_eq!(exp.runs[r as usize].seed, 40 + r);
            assert_eq!(exp.runs[r as usize].records, out.records);
            finals.push(out.final_record().objective_avg);
        }
        let mean = finals.iter().sum::<f64>() / 4.0;
        assert!((exp.summary.objective.mean - mean).abs() < 1e-14 * mean.abs());
    }
}

#[test]
fn objective_decreases_over_a_run() {
    let data: Dataset<f64> = synthetic_dataset(500, 9, 0.1, 12).unwrap();
    let problem = Problem::prepare(&data, &GraphSource::Precision(GraphHeuristic::default()), 0.8, 0, false).unwrap();
    for kind in PolicyKind::ALL {
        let step = adasadmm::harness::default_step(kind, if kind == PolicyKind::Identity { None } else { Some(0.5) });
        let cfg = RunConfig { epochs: 3.0, eval_every: 10, wall_time: false, step, ..RunConfig::default() };
        let out = run(&problem.train, &problem.test, &problem.graph, &problem.params, &cfg, kind).unwrap();
        let objs: Vec<f64> = out.records.iter().map(|r| r.objective_avg).collect();
        let k = objs.len() / 10;
        let median = |s: &[f64]| {
            let mut s = s.to_vec();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            s[s.len() / 2]
        };
        assert!(median(&objs[objs.len() - k..]) < median(&objs[..k]), "{kind}");
    }
}

#[test]
fn libsvm_fixture_parses() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/tiny.libsvm");
    let data: Dataset<f64> = read_libsvm(path, None).unwrap();
    assert_eq!(data.len(), 10);
    assert_eq!(data.dim(), 6);
    let positives = data.samples().iter().filter(|s| s.label == Label::Positive).count();
    assert_eq!(positives, 5);
    assert_eq!(data.sample(0).features.indices(), &[0, 2]);
    assert_eq!(data.sample(0).features.values(), &[0.5, -1.25]);
    assert_eq!(data.sample(9).features.indices(), &[5]);
    assert_eq!(data.sample(9).features.values(), &[3.0]);

    let text = std::fs::read_to_string(path).unwrap();
    let again: Dataset<f64> = parse_libsvm(BufReader::new(text.as_bytes()), Some(6)).unwrap();
    assert_eq!(again, data);
    let wider: Dataset<f64> = parse_libsvm(BufReader::new(text.as_bytes()), Some(8)).unwrap();
    assert_eq!(wider.dim(), 8);
}

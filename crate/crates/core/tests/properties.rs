use adasadmm::data::{
    parse_libsvm, parse_metrics_csv, split, write_libsvm, write_metrics_csv, GraphHeuristic,
    MetricsRecord,
};
use adasadmm::linalg::{
    dual_norm_sq, g_norm_sq, psd_sqrt, soft_threshold, DiagonalMatrix, SparseVector,
    SymmetricMatrix,
};
use adasadmm::problem::{
    full_gradient, instance_loss, objective, stochastic_subgradient, Dataset, Edge, GgsvmParams,
    GraphIncidence, Label, Sample,
};
use adasadmm::solver::{
    run, step_w, w_subproblem_gradient, MetricPolicy, PolicyKind, RunConfig, SolverState,
    StepSize,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn gram_of(d: usize, r: usize, a: &[f64]) -> SymmetricMatrix<f64> {
    SymmetricMatrix::from_upper_fn(d, |i, j| (0..r).map(|k| a[i * r + k] * a[j * r + k]).sum())
}

fn dense(m: &SymmetricMatrix<f64>) -> DMatrix<f64> {
    let n = m.dim();
    DMatrix::from_fn(n, n, |i, j| m.get(i, j))
}

fn psd_strategy(max_d: usize) -> impl Strategy<Value = SymmetricMatrix<f64>> {
    (1..=max_d, 1..=max_d).prop_flat_map(|(d, r)| {
        prop::collection::vec(-2.0..2.0f64, d * r).prop_map(move |a| gram_of(d, r, &a))
    })
}

fn sample_strategy(d: usize) -> impl Strategy<Value = Sample<f64>> {
    (prop::collection::vec(prop_oneof![Just(0.0), -3.0..3.0f64], d), any::<bool>()).prop_map(
        |(x, pos)| {
            Sample::new(
                SparseVector::from_dense(&x),
                if pos { Label::Positive } else { Label::Negative },
            )
        },
    )
}

fn dataset_strategy(d: usize) -> impl Strategy<Value = Dataset<f64>> {
    prop::collection::vec(sample_strategy(d), 1..12).prop_map(move |s| Dataset::new(s, d).unwrap())
}

fn graph_strategy(d: usize) -> impl Strategy<Value = GraphIncidence<f64>> {
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let n = pairs.len();
    (prop::sample::subsequence(pairs, 0..=n), prop::collection::vec(0.3..2.0f64, n)).prop_map(
        move |(chosen, weights)| {
            let edges = chosen
                .into_iter()
                .zip(weights)
                .map(|((i, j), weight)| Edge { i, j, weight })
                .collect();
            GraphIncidence::new(d, edges).unwrap()
        },
    )
}

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psd_sqrt_squares_back(m in psd_strategy(12)) {
        let r = dense(&psd_sqrt(&m, 1e-10).unwrap());
        let md = dense(&m);
        prop_assert!((&r * &r - &md).norm() <= 1e-8 * md.norm().max(1e-300));
    }

    #[test]
    fn psd_sqrt_is_operator_monotone(m in psd_strategy(8), delta in psd_strategy(8)) {
        prop_assume!(m.dim() == delta.dim());
        let mut sum = m.clone();
        sum.add_scaled(1.0, &delta);
        let diff = dense(&psd_sqrt(&sum, 1e-10).unwrap()) - dense(&psd_sqrt(&m, 1e-10).unwrap());
        let min = diff.symmetric_eigen().eigenvalues.min();
        prop_assert!(min >= -1e-8 * sum.frobenius_norm());
    }

    #[test]
    fn dual_norm_agrees_with_solved_g_norm(m in psd_strategy(8), shift in 0.1..2.0f64, seed in vec_strategy(8)) {
        let d = m.dim();
        let mut h = m.clone();
        h.add_identity(shift);
        let g = &seed[..d];
        // x = H^{-1} g through an independent dense factorization
        let x = dense(&h).cholesky().unwrap().solve(&nalgebra::DVector::from_column_slice(g));
        let lhs = dual_norm_sq(g, &h).unwrap();
        let rhs = g_norm_sq(x.as_slice(), &h).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1e-12));

        let diag = DiagonalMatrix::new(h.diag());
        let xd: Vec<f64> = g.iter().zip(h.diag().iter()).map(|(a, b)| a / b).collect();
        let lhs = dual_norm_sq(g, &diag).unwrap();
        prop_assert!((lhs - g_norm_sq(&xd, &diag).unwrap()).abs() <= 1e-8 * lhs.abs().max(1e-12));
    }

    #[test]
    fn soft_threshold_is_nonexpansive(a in vec_strategy(6), b in vec_strategy(6), lambda in 0.0..3.0f64) {
        let (sa, sb) = (soft_threshold(&a, lambda), soft_threshold(&b, lambda));
        let d_out: f64 = sa.iter().zip(sb.iter()).map(|(x, y)| (x - y).powi(2)).sum();
        let d_in: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        prop_assert!(d_out <= d_in + 1e-15);
    }

    #[test]
    fn objective_is_convex(
        data in dataset_strategy(4),
        w1 in vec_strategy(4), w2 in vec_strategy(4),
        v1 in vec_strategy(3), v2 in vec_strategy(3),
        lambda in 0.0..=1.0f64,
    ) {
        let p = GgsvmParams::new(0.1, 0.3).unwrap();
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect()
        };
        let lhs = objective(&mix(&w1, &w2), &mix(&v1, &v2), &data, &p);
        let rhs = lambda * objective(&w1, &v1, &data, &p) + (1.0 - lambda) * objective(&w2, &v2, &data, &p);
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn subgradient_inequality(s in sample_strategy(5), w in vec_strategy(5), us in prop::collection::vec(vec_strategy(5), 100)) {
        let p = GgsvmParams::new(0.2, 0.2).unwrap();
        let g = stochastic_subgradient(&w, &s, &p);
        let base = instance_loss(&w, &s, &p);
        for u in &us {
            let lin: f64 = g.iter().zip(u.iter().zip(&w)).map(|(gi, (ui, wi))| gi * (ui - wi)).sum();
            prop_assert!(instance_loss(u, &s, &p) >= base + lin - 1e-10);
        }
    }

    #[test]
    fn full_gradient_is_mean_of_subgradients(data in dataset_strategy(4), w in vec_strategy(4)) {
        let p = GgsvmParams::for_sample_count(data.len()).unwrap();
        let mut acc = vec![0.0; 4];
        for s in data.samples() {
            for (a, g) in acc.iter_mut().zip(stochastic_subgradient(&w, s, &p).iter()) {
                *a += g;
            }
        }
        let mean: Vec<f64> = acc.iter().map(|a| a / data.len() as f64).collect();
        let full = full_gradient(&w, &data, &p);
        prop_assert_eq!(full.as_slice(), mean.as_slice());
    }

    #[test]
    fn cached_gram_matches_incidence(graph in graph_strategy(6), w in vec_strategy(6)) {
        let direct = graph.apply_transpose(&graph.apply(&w));
        let cached = graph.gram().matvec(&w);
        for (a, b) in direct.iter().zip(cached.iter()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn multiplier_recursion_and_metric_monotonicity(
        graph in graph_strategy(4),
        data in dataset_strategy(4),
        kind in prop_oneof![Just(PolicyKind::Identity), Just(PolicyKind::Diagonal), Just(PolicyKind::Full)],
        beta in 0.3..3.0f64,
        steps in 1usize..15,
    ) {
        let p = GgsvmParams::for_sample_count(data.len()).unwrap();
        let cfg = RunConfig { beta, step: StepSize::Constant(0.7), ..RunConfig::default() };
        let mut state = SolverState::new(4, graph.num_edges(), kind, &cfg);
        for t in 0..steps {
            let g = stochastic_subgradient(&state.w, data.sample(t % data.len()), &p);
            let before_theta = state.theta.clone();
            let before_h = state.metric.to_matrix();
            let before_s = state.metric.diag_scale();
            state.step(&g, &graph, &p, &cfg).unwrap();
            let fw = graph.apply(&state.w);
            for e in 0..graph.num_edges() {
                let lhs = (before_theta[e] - state.theta[e]) / beta;
                prop_assert!((lhs - (fw[e] - state.v[e])).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }
            let after_h = state.metric.to_matrix();
            if let (Some(a), Some(b)) = (before_s, state.metric.diag_scale()) {
                prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| y >= x));
            }
            let diff = dense(&after_h) - dense(&before_h);
            prop_assert!(diff.symmetric_eigen().eigenvalues.min() >= -1e-8 * after_h.frobenius_norm());
        }
    }

    #[test]
    fn w_step_is_stationary(
        graph in graph_strategy(5),
        kind in prop_oneof![Just(PolicyKind::Identity), Just(PolicyKind::Diagonal), Just(PolicyKind::Full)],
        grads in prop::collection::vec(vec_strategy(5), 1..4),
        w_t in vec_strategy(5), g in vec_strategy(5), extra in vec_strategy(20),
        beta in 0.3..3.0f64, eta in 0.05..3.0f64,
        direct in any::<bool>(),
    ) {
        let m = graph.num_edges();
        let (v_t, theta) = (&extra[..m], &extra[10..10 + m]);
        let mut metric = MetricPolicy::new(kind, 5, 1.0, 1e-10);
        for gr in &grads {
            metric.update(gr).unwrap();
        }
        let out = step_w(&w_t, v_t, theta, &g, &metric, &graph, beta, eta, 1e-12, if direct { 64 } else { 0 }).unwrap();
        let grad = w_subproblem_gradient(&out.w, &w_t, v_t, theta, &g, &metric, &graph, beta, eta);
        let rhs_scale = 1.0 + g.iter().chain(&w_t).chain(&extra).map(|x| x.abs()).fold(0.0, f64::max) * (1.0 + 1.0 / eta) * 10.0;
        prop_assert!(grad.norm() <= 1e-8 * rhs_scale, "{}", grad.norm());
    }

    #[test]
    fn libsvm_round_trip(data in dataset_strategy(7)) {
        let mut buf = Vec::new();
        write_libsvm(&data, &mut buf).unwrap();
        let back: Dataset<f64> = parse_libsvm(buf.as_slice(), Some(7)).unwrap();
        prop_assert_eq!(back.len(), data.len());
        for (a, b) in back.samples().iter().zip(data.samples()) {
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(a.features.indices(), b.features.indices());
            for (x, y) in a.features.values().iter().zip(b.features.values()) {
                prop_assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn split_partitions(data in dataset_strategy(3), frac in 0.1..0.9f64, seed in any::<u64>()) {
        prop_assume!(data.len() >= 2);
        let n_train = (frac * data.len() as f64 + 1e-9).floor() as usize;
        prop_assume!(n_train >= 1 && n_train < data.len());
        let (a, b) = split(&data, frac, seed).unwrap();
        let key = |s: &Sample<f64>| format!("{:?}", s);
        let mut all: Vec<String> = data.samples().iter().map(key).collect();
        let mut parts: Vec<String> = a.samples().iter().chain(b.samples()).map(key).collect();
        all.sort();
        parts.sort();
        prop_assert_eq!(all, parts);
    }

    #[test]
    fn graph_is_sample_order_invariant(data in dataset_strategy(4), seed in any::<u64>()) {
        let mut samples = data.samples().to_vec();
        adasadmm::rng::Prng::seeded(seed).shuffle(&mut samples);
        let shuffled = Dataset::new(samples, 4).unwrap();
        let h = GraphHeuristic { shrinkage: Some(0.5), threshold: Some(1e-6), max_edges: Some(3) };
        prop_assert_eq!(h.build(&data).unwrap(), h.build(&shuffled).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn runs_are_bit_identical(data in dataset_strategy(4), graph in graph_strategy(4), seed in any::<u64>()) {
        let p = GgsvmParams::for_sample_count(data.len()).unwrap();
        for kind in PolicyKind::ALL {
            let cfg = RunConfig { seed, epochs: 3.0, eval_every: 2, wall_time: false, step: StepSize::Constant(0.5), ..RunConfig::default() };
            let a = run(&data, &data, &graph, &p, &cfg, kind).unwrap();
            let b = run(&data, &data, &graph, &p, &cfg, kind).unwrap();
            prop_assert_eq!(&a.records, &b.records);
            let strictly_increasing = a.records.windows(2).all(|w| w[0].iter < w[1].iter);
            prop_assert!(strictly_increasing);
        }
    }
}

#[test]
fn metrics_csv_rewrite_is_identical() {
    let mut rng = adasadmm::rng::Prng::seeded(100);
    let mut iter = 0;
    let records: Vec<MetricsRecord<f64>> = (0..100)
        .map(|_| {
            iter += 1 + rng.index(50);
            MetricsRecord {
                iter,
                epoch: iter as f64 / 1027.0,
                objective_avg: rng.exponential() * 10f64.powi(rng.index(9) as i32 - 4),
                objective_last: rng.normal(),
                test_error_avg: rng.uniform(),
                test_error_last: rng.index(257) as f64 / 257.0,
                feasibility_avg: rng.exponential() * 1e-7,
                wall_time_s: rng.uniform() * 3.0,
            }
        })
        .collect();
    let mut first = Vec::new();
    write_metrics_csv(&records, &mut first).unwrap();
    let text = String::from_utf8(first).unwrap();
    let parsed = parse_metrics_csv::<f64>(&text).unwrap();
    assert_eq!(parsed, records);
    let mut second = Vec::new();
    write_metrics_csv(&parsed, &mut second).unwrap();
    assert_eq!(text, String::from_utf8(second).unwrap());
    assert!(text.starts_with("iter,epoch,objective_avg,objective_last,test_error_avg,test_error_last,feasibility_avg,wall_time_s\n"));
    assert!(!text.contains('\r'));
}

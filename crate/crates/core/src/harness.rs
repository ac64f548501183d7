//! Experiment driver: dataset and graph loading, repeated seeded runs,
//! step-size grid search and the flat `key = value` settings format.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{load_edges, read_libsvm, split, write_metrics_csv, GraphHeuristic, MetricsRecord};
use crate::diagnostics::{check_run_inequalities, InequalityReport};
use crate::error::{Error, Result};
use crate::linalg::SparseVector;
use crate::problem::{objective, Dataset, GgsvmParams, GraphIncidence, Label, Sample};
use crate::rng::Prng;
use crate::solver::{run, PolicyKind, RunConfig, StepSize};
use crate::Scalar;

/// `2^{-5}, ..., 2^5`.
pub fn default_eta_grid<T: Scalar>() -> Vec<T> {
    (-5..=5).map(|k| T::lit(2f64.powi(k))).collect()
}

/// SADMM uses `eta_t = 1/(gamma t)`; the adaptive methods a constant step.
pub fn default_step<T: Scalar>(policy: PolicyKind, eta: Option<T>) -> StepSize<T> {
    match (policy, eta) {
        (_, Some(eta)) => StepSize::Constant(eta),
        (PolicyKind::Identity, None) => StepSize::InverseRidge,
        (_, None) => StepSize::Constant(T::one()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphSource<T> {
    EdgeFile(PathBuf),
    Precision(GraphHeuristic<T>),
}

/// Train/test split plus graph and regularization weights.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    pub graph: GraphIncidence<T>,
    pub params: GgsvmParams<T>,
}

impl<T: Scalar> Problem<T> {
    /// Splits `data`, optionally rescales by the training max-abs, builds the
    /// graph and sets `gamma = nu = 1/n_train`.
    pub fn prepare(
        data: &Dataset<T>,
        graph: &GraphSource<T>,
        train_fraction: f64,
        split_seed: u64,
        normalize: bool,
    ) -> Result<Self> {
        let (mut train, mut test) = split(data, train_fraction, split_seed)?;
        if normalize {
            let scale = train.max_abs_scale();
            train = train.rescaled(&scale)?;
            test = test.rescaled(&scale)?;
        }
        let graph = match graph {
            GraphSource::EdgeFile(path) => load_edges(path, train.dim())?,
            GraphSource::Precision(h) => h.build(&train)?,
        };
        let params = GgsvmParams::for_sample_count(train.len())?;
        Ok(Self {
            train,
            test,
            graph,
            params,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec<T> {
    pub dataset: PathBuf,
    pub graph: GraphSource<T>,
    pub policy: PolicyKind,
    pub config: RunConfig<T>,
    pub repeats: usize,
    pub eta_grid: Vec<T>,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub normalize: bool,
}

impl<T: Scalar> ExperimentSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::invalid("repeats", "must be at least 1"));
        }
        self.config.validate()
    }

    pub fn load(&self) -> Result<Problem<T>> {
        let data = read_libsvm(&self.dataset, None)?;
        Problem::prepare(&data, &self.graph, self.train_fraction, self.split_seed, self.normalize)
    }
}

/// Final metrics of one seeded run.
#[derive(Clone, Debug)]
pub struct RunResult<T> {
    pub seed: u64,
    pub records: Vec<MetricsRecord<T>>,
    /// Present when the run logged gradients under an adaptive metric.
    pub inequality: Option<InequalityReport<T>>,
    pub cg_unconverged: usize,
}

impl<T: Scalar> RunResult<T> {
    pub fn last(&self) -> &MetricsRecord<T> {
        self.records.last().expect("runs record at least once")
    }
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub policy: PolicyKind,
    pub runs: usize,
    pub objective: Stat,
    pub test_error: Stat,
    pub total_time_s: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<9} objective {}  test error {}  time {:.3}s ({} runs)",
            self.policy.name(),
            self.objective,
            self.test_error,
            self.total_time_s,
            self.runs
        )
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult<T> {
    pub runs: Vec<RunResult<T>>,
    pub summary: Summary,
}

/// Seeds `base_seed, base_seed + 1, ...`, one run each, run in parallel and
/// aggregated in seed order.
pub fn run_experiment<T: Scalar>(
    problem: &Problem<T>,
    policy: PolicyKind,
    config: &RunConfig<T>,
    repeats: usize,
) -> Result<ExperimentResult<T>> {
    if repeats == 0 {
        return Err(Error::invalid("repeats", "must be at least 1"));
    }
    config.validate()?;
    let seeds: Vec<u64> = (0..repeats as u64).map(|r| config.seed.wrapping_add(r)).collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| run_one(problem, policy, config, seed))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(policy, &runs);
    Ok(ExperimentResult { runs, summary })
}

fn run_one<T: Scalar>(
    problem: &Problem<T>,
    policy: PolicyKind,
    config: &RunConfig<T>,
    seed: u64,
) -> Result<RunResult<T>> {
    let mut cfg = config.clone();
    cfg.seed = seed;
    cfg.log_gradients = policy != PolicyKind::Identity;
    let out = run(&problem.train, &problem.test, &problem.graph, &problem.params, &cfg, policy)?;
    let inequality = match &out.state.gradient_log {
        Some(log) => Some(check_run_inequalities(log, policy)?),
        None => None,
    };
    Ok(RunResult {
        seed,
        records: out.records,
        inequality,
        cg_unconverged: out.state.cg_warnings.unconverged_steps,
    })
}

pub fn summarize<T: Scalar>(policy: PolicyKind, runs: &[RunResult<T>]) -> Summary {
    let obj: Vec<f64> = runs.iter().map(|r| r.last().objective_avg.to_f64_lossy()).collect();
    let err: Vec<f64> = runs.iter().map(|r| r.last().test_error_avg.to_f64_lossy()).collect();
    Summary {
        policy,
        runs: runs.len(),
        objective: Stat::of(&obj),
        test_error: Stat::of(&err),
        total_time_s: runs.iter().map(|r| r.last().wall_time_s).sum(),
    }
}

/// Writes `<prefix>_<algo>_seed<k>.csv` per run into `dir`.
pub fn write_run_csvs<T: Scalar>(
    dir: &Path,
    prefix: &str,
    policy: PolicyKind,
    runs: &[RunResult<T>],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for r in runs {
        let path = dir.join(format!("{prefix}_{}_seed{}.csv", policy.name(), r.seed));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_metrics_csv(&r.records, BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Clone, Debug)]
pub struct GridResult<T> {
    pub best_eta: T,
    /// `(eta, validation objective)`; diverged runs score `+inf`.
    pub scores: Vec<(T, T)>,
}

/// Picks the step minimizing the validation objective of the averaged
/// iterate after a fit on a seeded 4:1 split of `train`. Ties go to the
/// smaller step.
pub fn grid_search_eta<T: Scalar>(
    train: &Dataset<T>,
    graph: &GraphIncidence<T>,
    policy: PolicyKind,
    config: &RunConfig<T>,
    grid: &[T],
    split_seed: u64,
) -> Result<GridResult<T>> {
    if grid.is_empty() {
        return Err(Error::invalid("eta grid", "must not be empty"));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if grid.len() == 1 {
        return Ok(GridResult {
            best_eta: grid[0],
            scores: vec![(grid[0], T::nan())],
        });
    }
    let (fit, val) = split(train, 0.8, split_seed)?;
    let params = GgsvmParams::for_sample_count(fit.len())?;
    let scores = grid
        .par_iter()
        .map(|&eta| {
            let mut cfg = config.clone();
            cfg.step = StepSize::Constant(eta);
            cfg.log_gradients = false;
            cfg.wall_time = false;
            cfg.eval_every = usize::MAX;
            let score = match run(&fit, &val, graph, &params, &cfg, policy) {
                Ok(out) => {
                    let avg = out.state.averaged_iterates()?;
                    let s = objective(&avg.u_w, &avg.u_v, &val, &params);
                    if s.is_finite() {
                        s
                    } else {
                        T::infinity()
                    }
                }
                Err(Error::Diverged { .. }) => T::infinity(),
                Err(e) => return Err(e),
            };
            Ok((eta, score))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, &(_, s)) in scores.iter().enumerate() {
        if s < scores[best].1 {
            best = k;
        }
    }
    Ok(GridResult {
        best_eta: scores[best].0,
        scores,
    })
}

/// One algorithm's benchmark: the step used and the seeded runs.
#[derive(Clone, Debug)]
pub struct BenchmarkEntry<T> {
    pub policy: PolicyKind,
    pub step: StepSize<T>,
    /// Validation scores when the step came from the grid.
    pub grid: Option<GridResult<T>>,
    pub result: ExperimentResult<T>,
}

/// The comparison protocol: SADMM with `eta_t = 1/(gamma t)`, the adaptive
/// metrics with a constant step chosen on `grid` unless `fixed_eta` is set,
/// each run for `repeats` seeds.
pub fn benchmark<T: Scalar>(
    problem: &Problem<T>,
    policies: &[PolicyKind],
    base: &RunConfig<T>,
    fixed_eta: Option<T>,
    grid: &[T],
    repeats: usize,
    split_seed: u64,
) -> Result<Vec<BenchmarkEntry<T>>> {
    let mut out = Vec::with_capacity(policies.len());
    for &policy in policies {
        let mut cfg = base.clone();
        let mut grid_result = None;
        cfg.step = match (policy, fixed_eta) {
            (_, Some(eta)) => StepSize::Constant(eta),
            (PolicyKind::Identity, None) => StepSize::InverseRidge,
            (_, None) => {
                let g = grid_search_eta(&problem.train, &problem.graph, policy, &cfg, grid, split_seed)?;
                let step = StepSize::Constant(g.best_eta);
                grid_result = Some(g);
                step
            }
        };
        let result = run_experiment(problem, policy, &cfg, repeats)?;
        out.push(BenchmarkEntry {
            policy,
            step: cfg.step,
            grid: grid_result,
            result,
        });
    }
    Ok(out)
}

/// Flat settings shared by the command line and `key = value` files.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub dataset: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub algo: Option<PolicyKind>,
    pub epochs: f64,
    pub beta: f64,
    pub eta: Option<f64>,
    pub a: f64,
    pub seed: u64,
    pub repeats: usize,
    pub eval_every: usize,
    pub deterministic: bool,
    pub rho: f64,
    pub out_dir: PathBuf,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub normalize: bool,
    pub shrinkage: Option<f64>,
    pub threshold: Option<f64>,
    pub max_edges: Option<usize>,
    pub wall_time: bool,
    pub cg_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            dataset: None,
            edges: None,
            algo: None,
            epochs: 2.0,
            beta: 1.0,
            eta: None,
            a: 1.0,
            seed: 0,
            repeats: 1,
            eval_every: 0,
            deterministic: false,
            rho: 1.0,
            out_dir: PathBuf::from("results"),
            train_fraction: 0.8,
            split_seed: 0,
            normalize: false,
            shrinkage: None,
            threshold: None,
            max_edges: None,
            wall_time: true,
            cg_tol: 1e-10,
        }
    }
}

fn parse_value<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::invalid("setting", format!("{key} = {value:?} is not valid")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::invalid("setting", format!("{key} = {value:?} is not a boolean"))),
    }
}

impl Settings {
    pub const KEYS: &'static [&'static str] = &[
        "dataset", "edges", "algo", "epochs", "beta", "eta", "a", "seed", "repeats", "eval_every",
        "deterministic", "rho", "out_dir", "train_fraction", "split_seed", "normalize", "shrinkage",
        "threshold", "max_edges", "wall_time", "cg_tol",
    ];

    /// Sets one key; `-` and `_` are interchangeable in key names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "dataset" => self.dataset = Some(PathBuf::from(v)),
            "edges" => self.edges = Some(PathBuf::from(v)),
            "algo" => self.algo = Some(parse_value(&key, v)?),
            "epochs" => self.epochs = parse_value(&key, v)?,
            "beta" => self.beta = parse_value(&key, v)?,
            "eta" => self.eta = Some(parse_value(&key, v)?),
            "a" => self.a = parse_value(&key, v)?,
            "seed" => self.seed = parse_value(&key, v)?,
            "repeats" => self.repeats = parse_value(&key, v)?,
            "eval_every" => self.eval_every = parse_value(&key, v)?,
            "deterministic" => self.deterministic = parse_bool(&key, v)?,
            "rho" => self.rho = parse_value(&key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "train_fraction" => self.train_fraction = parse_value(&key, v)?,
            "split_seed" => self.split_seed = parse_value(&key, v)?,
            "normalize" => self.normalize = parse_bool(&key, v)?,
            "shrinkage" => self.shrinkage = Some(parse_value(&key, v)?),
            "threshold" => self.threshold = Some(parse_value(&key, v)?),
            "max_edges" => self.max_edges = Some(parse_value(&key, v)?),
            "wall_time" => self.wall_time = parse_bool(&key, v)?,
            "cg_tol" => self.cg_tol = parse_value(&key, v)?,
            _ => return Err(Error::invalid("setting", format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file over the current values.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (key, (line, value)) in parse_config(text)? {
            self.set(&key, &value).map_err(|e| Error::Parse {
                line,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_file_text(&text).map_err(|e| e.in_file(path))
    }

    pub fn graph_source(&self) -> GraphSource<f64> {
        match &self.edges {
            Some(p) => GraphSource::EdgeFile(p.clone()),
            None => GraphSource::Precision(self.heuristic()),
        }
    }

    pub fn heuristic(&self) -> GraphHeuristic<f64> {
        GraphHeuristic {
            shrinkage: self.shrinkage,
            threshold: self.threshold,
            max_edges: self.max_edges,
        }
    }

    /// Solver configuration for `policy` with the step given by `eta` if set.
    pub fn run_config(&self, policy: PolicyKind) -> RunConfig<f64> {
        RunConfig {
            beta: self.beta,
            step: default_step(policy, self.eta),
            a: self.a,
            epochs: self.epochs,
            seed: self.seed,
            eval_every: self.eval_every,
            deterministic_full_gradient: self.deterministic,
            rho: self.rho,
            cg_tol: self.cg_tol,
            wall_time: self.wall_time,
            ..RunConfig::default()
        }
    }

    pub fn spec(&self, policy: PolicyKind) -> Result<ExperimentSpec<f64>> {
        let dataset = self
            .dataset
            .clone()
            .ok_or_else(|| Error::invalid("dataset", "no dataset given"))?;
        Ok(ExperimentSpec {
            dataset,
            graph: self.graph_source(),
            policy,
            config: self.run_config(policy),
            repeats: self.repeats,
            eta_grid: default_eta_grid(),
            train_fraction: self.train_fraction,
            split_seed: self.split_seed,
            normalize: self.normalize,
        })
    }
}

/// Parses `key = value` lines. `#` starts a comment, blank lines are
/// skipped, a later assignment overrides an earlier one. Values keep the
/// line they came from.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: k + 1,
            reason: format!("expected `key = value`, got {line:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line: k + 1,
                reason: "empty key".into(),
            });
        }
        out.insert(key.replace('-', "_"), (k + 1, value.trim().to_string()));
    }
    Ok(out)
}

/// Seeded binary classification data with correlated feature groups:
/// each feature is a noisy copy of one of `d / 3` latent factors, and the
/// label is a noisy linear rule of the factors with `flip` label noise.
pub fn synthetic_dataset<T: Scalar>(n: usize, d: usize, flip: f64, seed: u64) -> Result<Dataset<T>> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("synthetic dataset", "needs n, d > 0"));
    }
    let mut rng = Prng::seeded(seed);
    let k = (d / 3).max(1);
    let truth: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
    let group: Vec<usize> = (0..d).map(|j| j % k).collect();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
        let x: Vec<T> = group
            .iter()
            .map(|&g| T::lit(z[g] + 0.5 * rng.normal()))
            .collect();
        let score: f64 = z.iter().zip(&truth).map(|(a, b)| a * b).sum();
        let mut label = if score >= 0.0 { Label::Positive } else { Label::Negative };
        if rng.uniform() < flip {
            label = match label {
                Label::Positive => Label::Negative,
                Label::Negative => Label::Positive,
            };
        }
        samples.push(Sample::new(SparseVector::from_dense(&x), label));
    }
    Dataset::new(samples, d)
}

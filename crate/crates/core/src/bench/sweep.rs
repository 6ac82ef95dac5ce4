//! Missing-level sweeps and grid tuning.

use std::time::Instant;

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Criterion, DataSource, ExperimentConfig, Method, TuningMode};
use crate::baselines::{mean_impute, mf_complete, observed_column_means, CompletionConfig};
use crate::dataio::{
    alzheimer_like, apply_column_scales, column_norms, inject_mcar, load_task_csv, nmse_cov, nmse_model,
    prediction_nmse, rmse, synth_generate, train_test_split, DatasetBundle,
};
use crate::error::{Error, Result};
use crate::estimators::{
    empirical_moments, plugin_moments_rlgr, threshold_moments, MaskedTaskData, MomentPair, ThresholdVariant,
};
use crate::solver::{fit, predict, Hyperparams, ModelMatrix};
use crate::taskgraph::{IncidenceMatrix, TaskGraph};

/// One hyperparameter setting. `delta` is only varied for R-LGR1 and
/// `rank` only for MF-LGR; both are fixed for the other methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub mu: f64,
    pub lambda: f64,
    pub delta: f64,
    pub rank: Option<usize>,
}

impl Candidate {
    fn order(&self, other: &Self) -> std::cmp::Ordering {
        self.mu
            .total_cmp(&other.mu)
            .then(self.lambda.total_cmp(&other.lambda))
            .then(self.delta.total_cmp(&other.delta))
            .then(self.rank.cmp(&other.rank))
    }
}

/// Metrics of one fitted method on one replication. Absent values mean the
/// metric does not apply (no ground truth) or the fit failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: Method,
    pub missing_fraction: f64,
    pub replication: usize,
    pub nmse_w: Option<f64>,
    pub nmse_gamma: Option<f64>,
    pub prediction_nmse: Option<f64>,
    pub rmse: Option<f64>,
    pub hyper: Candidate,
    pub runtime_ms: f64,
    pub converged: Option<bool>,
    /// Error message when the row could not be computed.
    pub error: Option<String>,
}

/// Hyperparameters picked for one method. `level` is `None` under global
/// tuning.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningChoice {
    pub method: Method,
    pub level: Option<f64>,
    pub candidate: Candidate,
    /// Mean criterion over the tuning instances.
    pub score: f64,
    pub grid_size: usize,
    /// Grid points excluded because a fit failed or scored non-finite.
    pub degenerate_points: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub choices: Vec<TuningChoice>,
    pub tuning: TuningMode,
    pub criterion: Criterion,
}

const STREAM_EVAL: u64 = 1;
const STREAM_TUNE: u64 = 2;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of indices.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(base), |acc, &p| splitmix(acc ^ splitmix(p)))
}

#[derive(Debug, Clone, Default)]
struct Metrics {
    nmse_w: Option<f64>,
    nmse_gamma: Option<f64>,
    prediction_nmse: Option<f64>,
    rmse: Option<f64>,
    converged: bool,
}

impl Metrics {
    fn criterion(&self, c: Criterion) -> Option<f64> {
        match c {
            Criterion::ModelNmse => self.nmse_w,
            Criterion::PredictionNmse => self.prediction_nmse,
        }
        .filter(|v| v.is_finite())
    }
}

struct Truth {
    model: ModelMatrix,
    gammas: Vec<DMatrix<f64>>,
}

/// Complete test features and responses, one entry per task.
struct TestSet {
    x: Vec<DMatrix<f64>>,
    y: Vec<DVector<f64>>,
}

/// Training data for one replication with whatever it is scored against.
struct Instance {
    train: DatasetBundle,
    truth: Option<Truth>,
    test: TestSet,
}

/// Resolved config plus the data that stays fixed across replications.
pub(crate) struct Experiment<'a> {
    cfg: &'a ExperimentConfig,
    graph: TaskGraph,
    incidence: IncidenceMatrix,
    base: Option<DatasetBundle>,
    criterion: Criterion,
}

impl<'a> Experiment<'a> {
    pub(crate) fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let criterion = cfg.criterion();
        let (graph, base) = match &cfg.data {
            DataSource::Synthetic { spec, .. } => (cfg.graph.build(spec.tasks)?, None),
            DataSource::Cohort { spec, dataset_seed } => {
                let graph = cfg.graph.build(spec.tasks)?;
                let (bundle, _) = alzheimer_like(spec, &graph, *dataset_seed)?;
                (graph, Some(bundle))
            }
            DataSource::Csv { paths } => {
                let bundle = load_task_csv(paths)?;
                let graph = cfg.graph.build(bundle.task_count())?;
                (graph.clone(), Some(bundle.with_graph(graph)?))
            }
        };
        if base.is_some() && criterion == Criterion::ModelNmse {
            return Err(Error::Config(
                "model-nmse needs a known model; use a synthetic source or prediction-nmse".into(),
            ));
        }
        let incidence = graph.incidence();
        Ok(Self {
            cfg,
            graph,
            incidence,
            base,
            criterion,
        })
    }

    fn instance(&self, level: f64, seed: u64) -> Result<Instance> {
        let [data_seed, mask_seed, split_seed] = [0, 1, 2].map(|i| derive_seed(seed, &[i]));
        match &self.cfg.data {
            DataSource::Synthetic { spec, test_samples } => {
                let (bundle, truth) = synth_generate(spec, &self.graph, data_seed)?;
                let train = inject_mcar(&bundle, level, mask_seed)?;
                let n_test = test_samples.unwrap_or(spec.n_per_task);
                let test = gaussian_test_set(&truth.true_model, n_test, truth.noise_std, split_seed)?;
                Ok(Instance {
                    train,
                    truth: Some(Truth {
                        model: truth.true_model,
                        gammas: truth.true_moments.iter().map(|m| m.gamma_mat().clone()).collect(),
                    }),
                    test,
                })
            }
            DataSource::Cohort { .. } | DataSource::Csv { .. } => {
                let base = self.base.as_ref().expect("fixed dataset is loaded");
                let masked = inject_mcar(base, level, mask_seed)?;
                let (mut train, mut test) = train_test_split(&masked, self.cfg.split.train_fraction, split_seed)?;
                if self.cfg.split.normalize {
                    let norms = column_norms(&train)?;
                    train = apply_column_scales(&train, &norms)?;
                    test = apply_column_scales(&test, &norms)?;
                }
                let test = fill_with_train_means(&train, &test);
                Ok(Instance {
                    train,
                    truth: None,
                    test,
                })
            }
        }
    }

    /// Moments for every (delta, rank) variant of `method` that the grid
    /// asks for, keyed by that variant.
    fn moment_variants(
        &self,
        inst: &Instance,
        method: Method,
    ) -> Vec<((f64, Option<usize>), Option<Vec<MomentPair>>)> {
        let tasks = &inst.train.tasks;
        let grid = &self.cfg.grid;
        match method {
            Method::MeanImpute | Method::Rlgr => vec![((0.0, None), self.moments(inst, method, 0.0, None).ok())],
            Method::MfLgr => grid
                .rank
                .iter()
                .map(|&r| ((0.0, Some(r)), self.moments(inst, method, 0.0, Some(r)).ok()))
                .collect(),
            Method::Rlgr1 => {
                // The R-LGR estimate is computed once and thresholded per delta.
                let base: Option<Vec<MomentPair>> = tasks.iter().map(|t| plugin_moments_rlgr(t).ok()).collect();
                grid.delta
                    .iter()
                    .map(|&d| {
                        let m = base.as_ref().and_then(|b| {
                            b.iter()
                                .map(|m| threshold_moments(m, d, self.cfg.threshold_variant).ok())
                                .collect()
                        });
                        ((d, None), m)
                    })
                    .collect()
            }
        }
    }

    fn moments(&self, inst: &Instance, method: Method, delta: f64, rank: Option<usize>) -> Result<Vec<MomentPair>> {
        let c = &self.cfg.completion;
        let completion = CompletionConfig {
            rank: rank.unwrap_or(1),
            max_iters: c.max_iters,
            tol: c.tol,
            ridge: c.ridge,
        };
        method_moments(method, &inst.train.tasks, delta, self.cfg.threshold_variant, &completion)
    }

    fn score(&self, inst: &Instance, moments: &[MomentPair], mu: f64, lambda: f64) -> Result<Metrics> {
        let hyper = Hyperparams::new(mu, lambda, 0.0)?;
        let report = fit(moments, &hyper, &self.incidence, &self.cfg.solver)?;
        let mut metrics = Metrics {
            converged: report.converged,
            ..Metrics::default()
        };
        if let Some(truth) = &inst.truth {
            metrics.nmse_w = Some(nmse_model(&report.model, &truth.model)?);
            let gammas: Vec<DMatrix<f64>> = moments.iter().map(|m| m.gamma_mat().clone()).collect();
            metrics.nmse_gamma = Some(nmse_cov(&gammas, &truth.gammas)?);
        }
        let preds = inst
            .test
            .x
            .iter()
            .enumerate()
            .map(|(i, x)| predict(x, &report.model.column(i)))
            .collect::<Result<Vec<_>>>()?;
        metrics.prediction_nmse = Some(prediction_nmse(&preds, &inst.test.y)?);
        metrics.rmse = Some(rmse(&preds, &inst.test.y)?);
        Ok(metrics)
    }

    fn candidates(&self, method: Method) -> Vec<Candidate> {
        let g = &self.cfg.grid;
        let variants: Vec<(f64, Option<usize>)> = match method {
            Method::MeanImpute | Method::Rlgr => vec![(0.0, None)],
            Method::MfLgr => g.rank.iter().map(|&r| (0.0, Some(r))).collect(),
            Method::Rlgr1 => g.delta.iter().map(|&d| (d, None)).collect(),
        };
        let mut out = Vec::new();
        for &(delta, rank) in &variants {
            for &mu in &g.mu {
                for &lambda in &g.lambda {
                    out.push(Candidate { mu, lambda, delta, rank });
                }
            }
        }
        out
    }

    /// Grid search on the tuning replications of the given levels.
    fn tune(&self, method: Method, levels: &[f64], reported_level: Option<f64>) -> Result<TuningChoice> {
        let candidates = self.candidates(method);
        let cells: Vec<(f64, usize)> = levels
            .iter()
            .flat_map(|&l| (0..self.cfg.tuning_replications).map(move |r| (l, r)))
            .collect();

        // scores[cell][candidate]
        let scores: Vec<Option<Vec<Option<f64>>>> = cells
            .par_iter()
            .map(|&(level, rep)| {
                let seed = derive_seed(self.cfg.base_seed, &[STREAM_TUNE, level.to_bits(), rep as u64]);
                let inst = match self.instance(level, seed) {
                    Ok(inst) => inst,
                    Err(e) => {
                        warn!("{method} tuning instance at level {level}, rep {rep} skipped: {e}");
                        return None;
                    }
                };
                let variants = self.moment_variants(&inst, method);
                let row = candidates
                    .iter()
                    .map(|c| {
                        let (_, moments) = variants
                            .iter()
                            .find(|((d, r), _)| *d == c.delta && *r == c.rank)
                            .expect("every candidate has a moment variant");
                        let moments = moments.as_ref()?;
                        self.score(&inst, moments, c.mu, c.lambda).ok()?.criterion(self.criterion)
                    })
                    .collect();
                Some(row)
            })
            .collect();

        let usable: Vec<&Vec<Option<f64>>> = scores.iter().flatten().collect();
        let level_tag = reported_level.map_or("all".to_string(), |l| l.to_string());
        if usable.is_empty() {
            return Err(Error::TuningFailure {
                method: method.to_string(),
                level: level_tag,
            });
        }
        let mut best: Option<(Candidate, f64)> = None;
        let mut degenerate = 0;
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| candidates[a].order(&candidates[b]));
        for j in order {
            let vals: Option<Vec<f64>> = usable.iter().map(|row| row[j]).collect();
            let Some(vals) = vals else {
                degenerate += 1;
                continue;
            };
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            if best.map_or(true, |(_, b)| mean < b) {
                best = Some((candidates[j], mean));
            }
        }
        let (candidate, score) = best.ok_or_else(|| Error::TuningFailure {
            method: method.to_string(),
            level: level_tag,
        })?;
        info!("{method} tuned at level {:?}: {candidate:?} (score {score:.4e})", reported_level);
        Ok(TuningChoice {
            method,
            level: reported_level,
            candidate,
            score,
            grid_size: candidates.len(),
            degenerate_points: degenerate,
        })
    }

    fn tune_all(&self) -> Result<Vec<TuningChoice>> {
        let levels = &self.cfg.missing_levels;
        let mut out = Vec::new();
        for &method in &self.cfg.methods {
            match self.cfg.tuning {
                TuningMode::PerLevel => {
                    for &l in levels {
                        out.push(self.tune(method, &[l], Some(l))?);
                    }
                }
                TuningMode::Global => out.push(self.tune(method, levels, None)?),
            }
        }
        Ok(out)
    }

    fn evaluate(&self, choices: &[TuningChoice]) -> Vec<ResultRow> {
        let cfg = self.cfg;
        let cells: Vec<(usize, usize)> = (0..cfg.missing_levels.len())
            .flat_map(|l| (0..cfg.replications).map(move |r| (l, r)))
            .collect();
        let mut rows: Vec<ResultRow> = cells
            .par_iter()
            .flat_map_iter(|&(li, rep)| {
                let level = cfg.missing_levels[li];
                let seed = derive_seed(cfg.base_seed, &[STREAM_EVAL, li as u64, rep as u64]);
                let inst = self.instance(level, seed);
                cfg.methods
                    .iter()
                    .map(|&method| {
                        let choice = choices
                            .iter()
                            .find(|c| c.method == method && c.level.map_or(true, |l| l == level))
                            .expect("every method and level was tuned");
                        let c = choice.candidate;
                        let start = Instant::now();
                        let result = match &inst {
                            Ok(inst) => self
                                .moments(inst, method, c.delta, c.rank)
                                .and_then(|m| self.score(inst, &m, c.mu, c.lambda))
                                .map_err(|e| e.to_string()),
                            Err(e) => Err(e.to_string()),
                        };
                        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                        let mut row = ResultRow {
                            method,
                            missing_fraction: level,
                            replication: rep,
                            nmse_w: None,
                            nmse_gamma: None,
                            prediction_nmse: None,
                            rmse: None,
                            hyper: c,
                            runtime_ms,
                            converged: None,
                            error: None,
                        };
                        match result {
                            Ok(m) => {
                                row.nmse_w = m.nmse_w;
                                row.nmse_gamma = m.nmse_gamma;
                                row.prediction_nmse = m.prediction_nmse;
                                row.rmse = m.rmse;
                                row.converged = Some(m.converged);
                            }
                            Err(e) => {
                                warn!("{method} at level {level}, rep {rep}: {e}");
                                row.error = Some(e);
                            }
                        }
                        row
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        sort_rows(&mut rows);
        rows
    }
}

/// Moment estimates of `method` for every task: plug-in estimates for
/// R-LGR and R-LGR1, empirical moments of the completed matrix for the
/// imputation baselines. `delta` is read by R-LGR1, `completion` by MF-LGR.
pub fn method_moments(
    method: Method,
    tasks: &[MaskedTaskData],
    delta: f64,
    variant: ThresholdVariant,
    completion: &CompletionConfig,
) -> Result<Vec<MomentPair>> {
    match method {
        Method::MeanImpute => tasks
            .iter()
            .map(|t| empirical_moments(&mean_impute(t).values, t.response()))
            .collect(),
        Method::MfLgr => tasks
            .iter()
            .map(|t| empirical_moments(&mf_complete(t, completion)?.values, t.response()))
            .collect(),
        Method::Rlgr => tasks.iter().map(plugin_moments_rlgr).collect(),
        Method::Rlgr1 => tasks
            .iter()
            .map(|t| threshold_moments(&plugin_moments_rlgr(t)?, delta, variant))
            .collect(),
    }
}

/// Orders rows by (method, level, replication).
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.missing_fraction.total_cmp(&b.missing_fraction))
            .then(a.replication.cmp(&b.replication))
    });
}

fn gaussian_test_set(model: &ModelMatrix, n: usize, noise_std: f64, seed: u64) -> Result<TestSet> {
    if n == 0 {
        return Err(Error::Config("test_samples must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = model.n_features();
    let mut x = Vec::with_capacity(model.task_count());
    let mut y = Vec::with_capacity(model.task_count());
    for i in 0..model.task_count() {
        let xi = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = DVector::from_fn(n, |_, _| noise_std * rng.sample::<f64, _>(StandardNormal));
        y.push(&xi * model.column(i) + noise);
        x.push(xi);
    }
    Ok(TestSet { x, y })
}

/// Test rows with each missing feature replaced by the training mean of that
/// column in the same task.
fn fill_with_train_means(train: &DatasetBundle, test: &DatasetBundle) -> TestSet {
    let mut x = Vec::with_capacity(test.task_count());
    let mut y = Vec::with_capacity(test.task_count());
    for (tr, te) in train.tasks.iter().zip(&test.tasks) {
        let means = observed_column_means(tr);
        x.push(DMatrix::from_fn(te.n_samples(), te.n_features(), |r, c| {
            if te.is_observed(r, c) {
                te.values()[(r, c)]
            } else {
                means[c].unwrap_or(0.0)
            }
        }));
        y.push(te.response().clone());
    }
    TestSet { x, y }
}

/// Tunes every configured method, then evaluates all replications with the
/// chosen hyperparameters. Rows come back sorted by (method, level,
/// replication) and are a pure function of the config.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutcome> {
    let exp = Experiment::new(config)?;
    let choices = exp.tune_all()?;
    let rows = exp.evaluate(&choices);
    Ok(SweepOutcome {
        rows,
        choices,
        tuning: config.tuning,
        criterion: exp.criterion,
    })
}

/// Evaluates with fixed hyperparameters, skipping the grid search. The
/// choices must cover every configured (method, level).
pub fn run_sweep_with(config: &ExperimentConfig, choices: Vec<TuningChoice>) -> Result<SweepOutcome> {
    let exp = Experiment::new(config)?;
    for &m in &config.methods {
        for &l in &config.missing_levels {
            if !choices.iter().any(|c| c.method == m && c.level.map_or(true, |x| x == l)) {
                return Err(Error::Config(format!("no hyperparameters for {m} at level {l}")));
            }
        }
    }
    let rows = exp.evaluate(&choices);
    Ok(SweepOutcome {
        rows,
        choices,
        tuning: config.tuning,
        criterion: exp.criterion,
    })
}

/// Picks hyperparameters for `method` at missing fraction `level` using the
/// tuning replications. Ties go to the smallest (mu, lambda, delta).
pub fn tune_grid(config: &ExperimentConfig, method: Method, level: f64) -> Result<TuningChoice> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Config(format!("missing level {level} outside [0, 1)")));
    }
    Experiment::new(config)?.tune(method, &[level], Some(level))
}

/// Runs only the tuning stage for every configured method.
pub fn tune_all(config: &ExperimentConfig) -> Result<Vec<TuningChoice>> {
    Experiment::new(config)?.tune_all()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::GridSpec;
    use crate::dataio::SynthSpec;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.data = DataSource::Synthetic {
            spec: SynthSpec {
                p: 8,
                tasks: 3,
                n_per_task: 30,
                sparsity: 2,
                ..SynthSpec::default()
            },
            test_samples: Some(20),
        };
        cfg.methods = vec![Method::Rlgr, Method::Rlgr1];
        cfg.missing_levels = vec![0.0, 0.2];
        cfg.replications = 1;
        cfg.tuning_replications = 1;
        cfg.grid = GridSpec {
            mu: vec![0.01],
            lambda: vec![0.1],
            delta: vec![0.0],
            rank: vec![2],
        };
        cfg
    }

    #[test]
    fn seeds_are_distinct_per_index() {
        let a = derive_seed(7, &[1, 0, 0]);
        assert_ne!(a, derive_seed(7, &[1, 0, 1]));
        assert_ne!(a, derive_seed(7, &[1, 1, 0]));
        assert_ne!(a, derive_seed(7, &[2, 0, 0]));
        assert_ne!(a, derive_seed(8, &[1, 0, 0]));
        assert_eq!(a, derive_seed(7, &[1, 0, 0]));
    }

    #[test]
    fn row_count_is_cartesian() {
        let out = run_sweep(&small_config()).unwrap();
        assert_eq!(out.rows.len(), 4);
        assert!(out.rows.iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn rlgr_and_rlgr1_agree_without_missing_data() {
        let out = run_sweep(&small_config()).unwrap();
        let at0: Vec<_> = out.rows.iter().filter(|r| r.missing_fraction == 0.0).collect();
        assert_eq!(at0.len(), 2);
        assert_eq!(at0[0].nmse_w, at0[1].nmse_w);
    }

    #[test]
    fn single_point_grid_is_returned() {
        let cfg = small_config();
        let c = tune_grid(&cfg, Method::Rlgr1, 0.2).unwrap();
        assert_eq!(
            c.candidate,
            Candidate {
                mu: 0.01,
                lambda: 0.1,
                delta: 0.0,
                rank: None
            }
        );
    }

    #[test]
    fn dominating_mu_loses() {
        let mut cfg = small_config();
        cfg.grid.mu = vec![1e6, 0.0];
        let c = tune_grid(&cfg, Method::Rlgr, 0.0).unwrap();
        assert_eq!(c.candidate.mu, 0.0);
        assert!(c.score < 1.0);
    }

    #[test]
    fn ties_go_to_the_smallest_point() {
        // With a huge mu every lambda gives W = 0, so every point scores 1.
        let mut cfg = small_config();
        cfg.grid.mu = vec![1e7, 1e6];
        cfg.grid.lambda = vec![1.0, 0.5];
        let c = tune_grid(&cfg, Method::Rlgr, 0.0).unwrap();
        assert_eq!((c.candidate.mu, c.candidate.lambda), (1e6, 0.5));
        assert_eq!(c.score, 1.0);
    }

    #[test]
    fn all_degenerate_grid_is_a_tuning_failure() {
        let mut cfg = small_config();
        cfg.methods = vec![Method::MfLgr];
        cfg.grid.rank = vec![50];
        let err = tune_grid(&cfg, Method::MfLgr, 0.2).unwrap_err();
        assert!(matches!(err, Error::TuningFailure { .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn model_criterion_needs_ground_truth() {
        let mut cfg = small_config();
        cfg.data = DataSource::Csv {
            paths: vec!["missing.csv".into()],
        };
        cfg.criterion = Some(Criterion::ModelNmse);
        assert!(Experiment::new(&cfg).is_err());
    }
}

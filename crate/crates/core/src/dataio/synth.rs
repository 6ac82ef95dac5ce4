use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DatasetBundle, Provenance, Split};
use crate::error::{Error, Result};
use crate::estimators::{empirical_moments, MaskedTaskData, MomentPair};
use crate::solver::ModelMatrix;
use crate::taskgraph::TaskGraph;

/// How coefficient supports relate between a task and its graph parent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportSharing {
    /// Child keeps `ceil(sparsity / 2)` of the parent's support indices.
    #[default]
    Partial,
    /// Child keeps the full parent support.
    Shared,
    /// Every task draws a fresh support.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub p: usize,
    pub tasks: usize,
    pub n_per_task: usize,
    pub sparsity: usize,
    pub noise_std: f64,
    #[serde(default)]
    pub support: SupportSharing,
    /// Std of the perturbation added to coefficients inherited from a parent.
    #[serde(default = "default_perturbation")]
    pub value_perturbation: f64,
}

fn default_perturbation() -> f64 {
    0.1
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            p: 50,
            tasks: 5,
            n_per_task: 100,
            sparsity: 7,
            noise_std: 0.1,
            support: SupportSharing::Partial,
            value_perturbation: default_perturbation(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticGroundTruth {
    pub true_model: ModelMatrix,
    pub complete_x: Vec<DMatrix<f64>>,
    pub noise_std: f64,
    /// Empirical moments of the complete data, the target for covariance NMSE.
    pub true_moments: Vec<MomentPair>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn sparse_model(spec: &SynthSpec, graph: &TaskGraph, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let (p, k, s) = (spec.p, spec.tasks, spec.sparsity);
    let mut w = DMatrix::<f64>::zeros(p, k);
    let mut supports: Vec<Vec<usize>> = Vec::with_capacity(k);
    for task in 0..k {
        // Parent: lowest-numbered neighbour that was generated before this task.
        let parent = graph
            .edges()
            .iter()
            .filter_map(|&(a, b)| (b == task).then_some(a))
            .min();
        let keep = match (spec.support, parent) {
            (_, None) | (SupportSharing::Independent, _) => 0,
            (SupportSharing::Partial, Some(_)) => s.div_ceil(2),
            (SupportSharing::Shared, Some(_)) => s,
        };
        let mut support = Vec::with_capacity(s);
        if let Some(par) = parent.filter(|_| keep > 0) {
            let parent_support = &supports[par];
            for idx in sample(rng, parent_support.len(), keep).into_iter() {
                let j = parent_support[idx];
                let v = w[(j, par)] + spec.value_perturbation * normal(rng);
                w[(j, task)] = if v == 0.0 { w[(j, par)] } else { v };
                support.push(j);
            }
        }
        let free: Vec<usize> = (0..p).filter(|j| !support.contains(j)).collect();
        for idx in sample(rng, free.len(), s - support.len()).into_iter() {
            let j = free[idx];
            let mut v = normal(rng);
            while v == 0.0 {
                v = normal(rng);
            }
            w[(j, task)] = v;
            support.push(j);
        }
        support.sort_unstable();
        supports.push(support);
    }
    w
}

/// Draws a sparse multi-task model and complete Gaussian data for it.
///
/// Entries of every `X_i` are i.i.d. standard normal and
/// `y_i = X_i W_i + noise_std * e_i`. The output is a pure function of
/// `(spec, graph, seed)`.
pub fn synth_generate(
    spec: &SynthSpec,
    graph: &TaskGraph,
    seed: u64,
) -> Result<(DatasetBundle, SyntheticGroundTruth)> {
    if spec.p == 0 || spec.tasks == 0 || spec.n_per_task == 0 || spec.sparsity == 0 {
        return Err(Error::invalid("p, tasks, n_per_task and sparsity must be positive"));
    }
    if spec.sparsity > spec.p {
        return Err(Error::invalid(format!(
            "sparsity {} exceeds feature count {}",
            spec.sparsity, spec.p
        )));
    }
    if !(spec.noise_std >= 0.0) {
        return Err(Error::invalid("noise_std must be nonnegative"));
    }
    if graph.task_count() != spec.tasks {
        return Err(Error::invalid(format!(
            "graph has {} tasks, spec asks for {}",
            graph.task_count(),
            spec.tasks
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = sparse_model(spec, graph, &mut rng);

    let mut tasks = Vec::with_capacity(spec.tasks);
    let mut complete_x = Vec::with_capacity(spec.tasks);
    let mut true_moments = Vec::with_capacity(spec.tasks);
    for i in 0..spec.tasks {
        let x = DMatrix::from_fn(spec.n_per_task, spec.p, |_, _| normal(&mut rng));
        let clean = &x * w.column(i);
        let y = if spec.noise_std == 0.0 {
            clean
        } else {
            DVector::from_fn(spec.n_per_task, |r, _| clean[r] + spec.noise_std * normal(&mut rng))
        };
        true_moments.push(empirical_moments(&x, &y)?);
        tasks.push(MaskedTaskData::complete(x.clone(), y)?);
        complete_x.push(x);
    }
    let bundle = DatasetBundle::new(tasks, graph.clone(), Split::Full, Provenance::Synthetic)?;
    let truth = SyntheticGroundTruth {
        true_model: ModelMatrix::new(w)?,
        complete_x,
        noise_std: spec.noise_std,
        true_moments,
    };
    Ok((bundle, truth))
}

/// Longitudinal cohort stand-in: one feature row per subject, shared by every
/// task (visit), with subjects dropping out over visits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub subjects: usize,
    pub p: usize,
    pub tasks: usize,
    pub sparsity: usize,
    pub noise_std: f64,
    /// Fraction of subjects still present at the last visit; retention falls
    /// linearly from 1 at the first visit.
    pub final_retention: f64,
    /// MCAR missing fraction in the subject feature matrix.
    pub base_missing: f64,
    /// Features are `|N(0,1)| + offset`, mimicking positive imaging measures.
    pub feature_offset: f64,
    /// Pairwise correlation of the latent Gaussian features.
    pub feature_correlation: f64,
    /// Constant added to every response so scores are positive.
    pub response_offset: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            subjects: 300,
            p: 50,
            tasks: 5,
            sparsity: 7,
            noise_std: 0.1,
            final_retention: 0.7,
            base_missing: 0.09,
            feature_offset: 1.0,
            feature_correlation: 0.0,
            response_offset: 0.0,
        }
    }
}

/// Generates a [`CohortSpec`] bundle. Each task holds the subjects present at
/// that visit; a subject's feature row and its missingness pattern are the
/// same in every task that contains it.
pub fn alzheimer_like(
    spec: &CohortSpec,
    graph: &TaskGraph,
    seed: u64,
) -> Result<(DatasetBundle, SyntheticGroundTruth)> {
    if spec.subjects < 2 || spec.p == 0 || spec.tasks == 0 || spec.sparsity == 0 || spec.sparsity > spec.p {
        return Err(Error::invalid("cohort spec has invalid sizes"));
    }
    if !(0.0..1.0).contains(&spec.base_missing) || !(spec.final_retention > 0.0 && spec.final_retention <= 1.0) {
        return Err(Error::invalid("base_missing must be in [0,1) and final_retention in (0,1]"));
    }
    if !(0.0..1.0).contains(&spec.feature_correlation) {
        return Err(Error::invalid("feature_correlation must be in [0,1)"));
    }
    if graph.task_count() != spec.tasks {
        return Err(Error::invalid("graph task count does not match cohort spec"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model_spec = SynthSpec {
        p: spec.p,
        tasks: spec.tasks,
        n_per_task: 1,
        sparsity: spec.sparsity,
        noise_std: spec.noise_std,
        support: SupportSharing::Partial,
        value_perturbation: default_perturbation(),
    };
    let w = sparse_model(&model_spec, graph, &mut rng);

    let rho = spec.feature_correlation;
    let features = DMatrix::from_fn(spec.subjects, spec.p, |_, _| 0.0);
    let mut features = features;
    for r in 0..spec.subjects {
        let common = normal(&mut rng);
        for c in 0..spec.p {
            let z = rho.sqrt() * common + (1.0 - rho).sqrt() * normal(&mut rng);
            features[(r, c)] = z.abs() + spec.feature_offset;
        }
    }
    let mut mask = DMatrix::from_element(spec.subjects, spec.p, true);
    let total = spec.subjects * spec.p;
    for idx in sample(&mut rng, total, (spec.base_missing * total as f64).floor() as usize) {
        mask[(idx % spec.subjects, idx / spec.subjects)] = false;
    }

    // Visit t keeps the first m_t subjects of a random dropout order.
    let order: Vec<usize> = sample(&mut rng, spec.subjects, spec.subjects).into_vec();
    let mut tasks = Vec::with_capacity(spec.tasks);
    let mut complete_x = Vec::with_capacity(spec.tasks);
    let mut true_moments = Vec::with_capacity(spec.tasks);
    for t in 0..spec.tasks {
        let frac = if spec.tasks == 1 {
            1.0
        } else {
            1.0 - (1.0 - spec.final_retention) * t as f64 / (spec.tasks - 1) as f64
        };
        let m = ((frac * spec.subjects as f64).round() as usize).clamp(2, spec.subjects);
        let mut rows: Vec<usize> = order[..m].to_vec();
        rows.sort_unstable();
        let x = features.select_rows(&rows);
        let task_mask = mask.select_rows(&rows);
        let clean = &x * w.column(t);
        let y = DVector::from_fn(m, |r, _| clean[r] + spec.response_offset + spec.noise_std * normal(&mut rng));
        true_moments.push(empirical_moments(&x, &y)?);
        tasks.push(MaskedTaskData::new(x.clone(), task_mask, y)?);
        complete_x.push(x);
    }
    let bundle = DatasetBundle::new(tasks, graph.clone(), Split::Full, Provenance::Synthetic)?;
    Ok((
        bundle,
        SyntheticGroundTruth {
            true_model: ModelMatrix::new(w)?,
            complete_x,
            noise_std: spec.noise_std,
            true_moments,
        },
    ))
}

//! Proximal-gradient solver for the graph-regularized multi-task objective
//!
//! ```text
//! F(W) = sum_i [ 1/2 W_i^T G_i W_i - W_i^T g_i ] + mu/2 |W|_1 + lambda/2 |W R|_F^2
//! ```
//!
//! where `(G_i, g_i)` are per-task second moments. With empirical moments this
//! is the least-squares objective `sum_i |X_i W_i - y_i|^2 / (2 n_i)` minus a
//! constant, so one code path serves both the complete-data and the plug-in
//! problem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::MomentPair;
use crate::taskgraph::IncidenceMatrix;

/// `p x K` coefficient matrix; column `i` is task `i`'s model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrix(DMatrix<f64>);

impl ModelMatrix {
    pub fn new(coefficients: DMatrix<f64>) -> Result<Self> {
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model coefficients must be finite"));
        }
        Ok(Self(coefficients))
    }

    pub fn zeros(p: usize, tasks: usize) -> Self {
        Self(DMatrix::zeros(p, tasks))
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn task_count(&self) -> usize {
        self.0.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.0.nrows()
    }

    pub fn column(&self, task: usize) -> DVector<f64> {
        self.0.column(task).into_owned()
    }

    pub fn nonzero_count(&self, task: usize) -> usize {
        self.0.column(task).iter().filter(|v| **v != 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// l1 weight.
    pub mu: f64,
    /// Graph penalty weight.
    pub lambda: f64,
    /// Eigenvalue threshold; only read by the R-LGR1 estimator.
    #[serde(default)]
    pub delta: f64,
}

impl Hyperparams {
    pub fn new(mu: f64, lambda: f64, delta: f64) -> Result<Self> {
        let h = Self { mu, lambda, delta };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu", self.mu), ("lambda", self.lambda), ("delta", self.delta)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iters: usize,
    /// Stop when `|F_prev - F| <= tol * |F_prev|`.
    pub tol: f64,
    /// Overrides the `1 / Lipschitz` starting step.
    pub initial_step: Option<f64>,
    pub backtrack_factor: f64,
    pub sufficient_decrease: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-6,
            initial_step: None,
            backtrack_factor: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub model: ModelMatrix,
    /// Objective at the starting point followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_step: f64,
}

fn check_dims(w: &DMatrix<f64>, moments: &[MomentPair], r: &IncidenceMatrix) -> Result<()> {
    let k = w.ncols();
    if moments.len() != k {
        return Err(Error::invalid(format!(
            "{} moment pairs for {k} model columns",
            moments.len()
        )));
    }
    if r.task_count() != k {
        return Err(Error::invalid(format!(
            "incidence matrix has {} rows for {k} tasks",
            r.task_count()
        )));
    }
    if let Some((i, m)) = moments.iter().enumerate().find(|(_, m)| m.dim() != w.nrows()) {
        return Err(Error::invalid(format!(
            "task {i} moments have dimension {}, model has {} features",
            m.dim(),
            w.nrows()
        )));
    }
    Ok(())
}

fn l1_norm(w: &DMatrix<f64>) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

fn graph_penalty(w: &DMatrix<f64>, edges: &[(usize, usize)]) -> f64 {
    edges
        .iter()
        .map(|&(u, v)| (w.column(u) - w.column(v)).norm_squared())
        .sum()
}

pub fn objective_value(
    w: &ModelMatrix,
    moments: &[MomentPair],
    hyper: &Hyperparams,
    r: &IncidenceMatrix,
) -> Result<f64> {
    let w = w.coefficients();
    check_dims(w, moments, r)?;
    let quad: f64 = moments
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let wi = w.column(i);
            0.5 * wi.dot(&(m.gamma_mat() * wi)) - wi.dot(m.gamma_vec())
        })
        .sum();
    Ok(quad + 0.5 * hyper.mu * l1_norm(w) + 0.5 * hyper.lambda * graph_penalty(w, &r.edge_endpoints()))
}

/// Gradient of the objective without the l1 term.
pub fn smooth_gradient(
    w: &ModelMatrix,
    moments: &[MomentPair],
    hyper: &Hyperparams,
    r: &IncidenceMatrix,
) -> Result<DMatrix<f64>> {
    let w = w.coefficients();
    check_dims(w, moments, r)?;
    let lap = r.gram().map(|v| v as f64);
    let mut grad = w * lap * hyper.lambda;
    for (i, m) in moments.iter().enumerate() {
        let col = m.gamma_mat() * w.column(i) - m.gamma_vec();
        let mut g = grad.column_mut(i);
        g += col;
    }
    Ok(grad)
}

/// Entrywise soft threshold `sign(w) max(|w| - t, 0)`; `|w| == t` maps to 0.
pub fn prox_l1(w: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    assert!(threshold >= 0.0, "threshold must be nonnegative, got {threshold}");
    w.map(|v| soft_threshold(v, threshold))
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn predict(x: &DMatrix<f64>, w_task: &DVector<f64>) -> Result<DVector<f64>> {
    if x.ncols() != w_task.len() {
        return Err(Error::invalid(format!(
            "feature count {} does not match model length {}",
            x.ncols(),
            w_task.len()
        )));
    }
    Ok(x * w_task)
}

/// Largest absolute eigenvalue of a symmetric matrix by power iteration.
pub fn spectral_norm_estimate(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic, non-symmetric start so it is unlikely to be orthogonal
    // to the dominant eigenvector.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt().fract());
    v.normalize_mut();
    let mut estimate = 0.0;
    for _ in 0..200 {
        let av = a * &v;
        let norm = av.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = av / norm;
        if (norm - estimate).abs() <= 1e-10 * norm {
            estimate = norm;
            break;
        }
        estimate = norm;
    }
    estimate
}

// Smooth part of the objective together with G_i W_i for every task, so the
// accepted candidate's products can be reused for the next gradient.
struct SmoothEval {
    value: f64,
    gw: Vec<DVector<f64>>,
}

struct Problem<'a> {
    moments: &'a [MomentPair],
    hyper: Hyperparams,
    edges: Vec<(usize, usize)>,
    laplacian: DMatrix<f64>,
}

impl Problem<'_> {
    fn smooth(&self, w: &DMatrix<f64>) -> SmoothEval {
        let mut value = 0.5 * self.hyper.lambda * graph_penalty(w, &self.edges);
        let gw: Vec<DVector<f64>> = self
            .moments
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let wi = w.column(i);
                let g = m.gamma_mat() * wi;
                value += 0.5 * wi.dot(&g) - wi.dot(m.gamma_vec());
                g
            })
            .collect();
        SmoothEval { value, gw }
    }

    fn gradient(&self, w: &DMatrix<f64>, eval: &SmoothEval) -> DMatrix<f64> {
        let mut grad = if self.hyper.lambda != 0.0 && !self.edges.is_empty() {
            w * &self.laplacian * self.hyper.lambda
        } else {
            DMatrix::zeros(w.nrows(), w.ncols())
        };
        for (i, m) in self.moments.iter().enumerate() {
            let mut g = grad.column_mut(i);
            g += &eval.gw[i];
            g -= m.gamma_vec();
        }
        grad
    }

    fn l1(&self, w: &DMatrix<f64>) -> f64 {
        0.5 * self.hyper.mu * l1_norm(w)
    }

    fn lipschitz_estimate(&self, max_degree: usize) -> f64 {
        let quad = self
            .moments
            .iter()
            .map(|m| spectral_norm_estimate(m.gamma_mat()))
            .fold(0.0, f64::max);
        quad + self.hyper.lambda * 2.0 * max_degree as f64
    }
}

const MAX_BACKTRACKS: usize = 200;

/// Minimizes the objective from `W = 0`.
///
/// Each iteration takes a proximal gradient step
/// `W <- prox_l1(W - t grad, t mu / 2)` and halves `t` until
/// `F(W+) <= F(W) - (c / t) |W+ - W|^2`, so the objective trace never
/// increases. The step carries over between iterations.
pub fn fit(
    moments: &[MomentPair],
    hyper: &Hyperparams,
    r: &IncidenceMatrix,
    settings: &SolverSettings,
) -> Result<SolverReport> {
    hyper.validate()?;
    if moments.is_empty() {
        return Err(Error::invalid("at least one task is required"));
    }
    let p = moments[0].dim();
    let k = moments.len();
    let mut w = DMatrix::<f64>::zeros(p, k);
    check_dims(&w, moments, r)?;
    if !(settings.tol > 0.0) || settings.max_iters == 0 {
        return Err(Error::invalid("solver settings need tol > 0 and max_iters >= 1"));
    }
    if !(settings.backtrack_factor > 0.0 && settings.backtrack_factor < 1.0) {
        return Err(Error::invalid("backtrack_factor must lie in (0, 1)"));
    }

    let edges = r.edge_endpoints();
    let mut degree = vec![0usize; k];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let problem = Problem {
        moments,
        hyper: *hyper,
        laplacian: r.gram().map(|v| v as f64),
        edges,
    };

    let mut step = match settings.initial_step {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::invalid(format!("initial_step must be positive, got {t}"))),
        None => {
            let lip = problem.lipschitz_estimate(degree.into_iter().max().unwrap_or(0));
            if lip > 0.0 {
                1.0 / lip
            } else {
                1.0
            }
        }
    };

    let mut eval = problem.smooth(&w);
    let mut f = eval.value + problem.l1(&w);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=settings.max_iters {
        iterations = iter;
        let grad = problem.gradient(&w, &eval);
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                iteration: iter,
                reason: "non-finite gradient".into(),
            });
        }
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = prox_l1(&(&w - &grad * step), step * hyper.mu / 2.0);
            let cand_eval = problem.smooth(&candidate);
            let cand_f = cand_eval.value + problem.l1(&candidate);
            if !cand_f.is_finite() {
                return Err(Error::NumericalFailure {
                    iteration: iter,
                    reason: format!("objective became {cand_f}"),
                });
            }
            let moved = (&candidate - &w).norm_squared();
            if cand_f <= f - settings.sufficient_decrease / step * moved {
                accepted = Some((candidate, cand_eval, cand_f));
                break;
            }
            step *= settings.backtrack_factor;
        }
        let Some((candidate, cand_eval, cand_f)) = accepted else {
            return Err(Error::NumericalFailure {
                iteration: iter,
                reason: "line search found no sufficient decrease".into(),
            });
        };
        let change = (f - cand_f).abs();
        let scale = f.abs();
        w = candidate;
        eval = cand_eval;
        f = cand_f;
        trace.push(f);
        if change <= settings.tol * scale {
            converged = true;
            break;
        }
    }

    Ok(SolverReport {
        model: ModelMatrix(w),
        objective_trace: trace,
        iterations,
        converged,
        final_step: step,
    })
}

//! Imputation baselines. Their output is a complete matrix that feeds the
//! complete-data path (`empirical_moments` followed by the solver).

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::MaskedTaskData;

/// Result of column-mean imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanImputation {
    pub values: DMatrix<f64>,
    /// Columns with no observed entry; these were filled with zeros.
    pub degenerate_columns: Vec<usize>,
}

/// Observed-entry mean of each column, `None` for a fully missing column.
pub fn observed_column_means(data: &MaskedTaskData) -> Vec<Option<f64>> {
    let mask = data.mask();
    data.values()
        .column_iter()
        .zip(mask.column_iter())
        .map(|(vals, m)| {
            let (sum, count) = vals
                .iter()
                .zip(m.iter())
                .filter(|(_, &o)| o)
                .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
            (count > 0).then(|| sum / count as f64)
        })
        .collect()
}

/// Replaces each missing entry with the mean of the observed entries of its
/// column. Observed entries are copied unchanged.
pub fn mean_impute(data: &MaskedTaskData) -> MeanImputation {
    let means = observed_column_means(data);
    let degenerate_columns: Vec<usize> = means
        .iter()
        .enumerate()
        .filter_map(|(j, m)| m.is_none().then_some(j))
        .collect();
    for &j in &degenerate_columns {
        warn!("column {j} has no observed entries; filling with 0");
    }
    let values = DMatrix::from_fn(data.n_samples(), data.n_features(), |r, c| {
        if data.is_observed(r, c) {
            data.values()[(r, c)]
        } else {
            means[c].unwrap_or(0.0)
        }
    });
    MeanImputation {
        values,
        degenerate_columns,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionConfig {
    pub rank: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub ridge: f64,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            rank: 5,
            max_iters: 200,
            tol: 1e-6,
            ridge: 1e-6,
        }
    }
}

impl CompletionConfig {
    pub fn with_rank(rank: usize) -> Self {
        Self {
            rank,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Completion {
    /// `U V^T`, including at observed positions.
    pub values: DMatrix<f64>,
    /// Observed-entry squared error plus ridge term, one value per
    /// alternation (index 0 is the spectral initialization).
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Low-rank completion by alternating ridge least squares.
///
/// Factors start from the top-`rank` singular triplets of the zero-filled,
/// `1 / (1 - rho)`-rescaled matrix, so the result is deterministic.
pub fn mf_complete(data: &MaskedTaskData, config: &CompletionConfig) -> Result<Completion> {
    let (n, p) = (data.n_samples(), data.n_features());
    let r = config.rank;
    if r == 0 || r > n.min(p) {
        return Err(Error::invalid(format!(
            "completion rank {r} must be in 1..={}",
            n.min(p)
        )));
    }
    if !(config.tol > 0.0) || config.ridge < 0.0 || config.max_iters == 0 {
        return Err(Error::invalid("completion config needs tol > 0, ridge >= 0, max_iters >= 1"));
    }

    let mask = data.mask();
    let x = data.values();
    let scale = 1.0 / (1.0 - data.missing_rate());
    let filled = DMatrix::from_fn(n, p, |i, j| if mask[(i, j)] { x[(i, j)] * scale } else { 0.0 });
    let (mut u, mut v) = spectral_init(filled, r);

    let objective = |u: &DMatrix<f64>, v: &DMatrix<f64>| {
        let mut loss = 0.0;
        for i in 0..n {
            for j in 0..p {
                if mask[(i, j)] {
                    let e = x[(i, j)] - u.row(i).dot(&v.row(j));
                    loss += e * e;
                }
            }
        }
        loss + config.ridge * (u.norm_squared() + v.norm_squared())
    };

    let mut trace = vec![objective(&u, &v)];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.max_iters {
        iterations += 1;
        for i in 0..n {
            let obs: Vec<(usize, f64)> = (0..p).filter(|&j| mask[(i, j)]).map(|j| (j, x[(i, j)])).collect();
            let row = ridge_solve(&v, &obs, config.ridge);
            u.set_row(i, &row.transpose());
        }
        for j in 0..p {
            let obs: Vec<(usize, f64)> = (0..n).filter(|&i| mask[(i, j)]).map(|i| (i, x[(i, j)])).collect();
            let row = ridge_solve(&u, &obs, config.ridge);
            v.set_row(j, &row.transpose());
        }
        let f = objective(&u, &v);
        let prev = *trace.last().unwrap();
        trace.push(f);
        if (prev - f).abs() <= config.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(Completion {
        values: &u * v.transpose(),
        objective_trace: trace,
        iterations,
        converged,
    })
}

fn spectral_init(filled: DMatrix<f64>, r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, p) = filled.shape();
    let svd = filled.svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let left = svd.u.expect("u requested");
    let right = svd.v_t.expect("v_t requested");
    let mut u = DMatrix::zeros(n, r);
    let mut v = DMatrix::zeros(p, r);
    for (k, &idx) in order.iter().take(r).enumerate() {
        let s = svd.singular_values[idx].sqrt();
        u.set_column(k, &(left.column(idx) * s));
        v.set_column(k, &(right.row(idx).transpose() * s));
    }
    (u, v)
}

// argmin_w sum_{(k, t) in obs} (t - f_k . w)^2 + ridge |w|^2
fn ridge_solve(factors: &DMatrix<f64>, obs: &[(usize, f64)], ridge: f64) -> DVector<f64> {
    let r = factors.ncols();
    let mut a = DMatrix::<f64>::identity(r, r) * ridge;
    let mut b = DVector::<f64>::zeros(r);
    for &(k, t) in obs {
        let f = factors.row(k);
        for c in 0..r {
            b[c] += f[c] * t;
            for d in 0..r {
                a[(c, d)] += f[c] * f[d];
            }
        }
    }
    if let Some(chol) = a.clone().cholesky() {
        return chol.solve(&b);
    }
    // Singular normal equations (ridge = 0 and too few observations).
    a.pseudo_inverse(1e-12).map(|pinv| pinv * b).unwrap_or_else(|_| DVector::zeros(r))
}

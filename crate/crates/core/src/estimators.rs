//! Second-moment estimates `(Gamma_i, gamma_i)` per task.
//!
//! * [`empirical_moments`]: `X^T X / n` and `X^T y / n` on complete data.
//! * [`plugin_moments_rlgr`]: missing-data corrected estimate. Missing entries
//!   are zero-filled, observed entries rescaled by `1 / (1 - rho)`, and the
//!   diagonal of `Z^T Z / n` is shrunk by the factor `rho`. Under MCAR
//!   missingness with rate `rho` this is unbiased for the complete-data
//!   moments, but it need not be positive semidefinite.
//! * [`plugin_moments_rlgr1`]: eigenvalues of the corrected estimate are
//!   passed through [`eig_soft_threshold`], which maps negative eigenvalues
//!   below `-delta` to `delta - u`. The result is positive semidefinite for
//!   every `delta > 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One task's feature matrix with its observation mask.
///
/// `mask[(r, c)] == true` means the entry is observed. Values at masked
/// positions are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedTaskData {
    values: DMatrix<f64>,
    mask: DMatrix<bool>,
    response: DVector<f64>,
    missing_rate: f64,
}

impl MaskedTaskData {
    /// Validates shapes and the response, rejects fully-missing columns, and
    /// estimates the missing rate from the mask.
    pub fn new(values: DMatrix<f64>, mask: DMatrix<bool>, response: DVector<f64>) -> Result<Self> {
        let data = Self::new_allow_degenerate(values, mask, response)?;
        check_columns(&data.mask)?;
        Ok(data)
    }

    /// Same as [`MaskedTaskData::new`] but tolerates columns with no observed
    /// entries. Only the imputation baselines accept such data; every
    /// plug-in estimator rejects it.
    pub fn new_allow_degenerate(
        values: DMatrix<f64>,
        mask: DMatrix<bool>,
        response: DVector<f64>,
    ) -> Result<Self> {
        let (n, p) = values.shape();
        if n == 0 || p == 0 {
            return Err(Error::invalid(format!("task data must be non-empty, got {n}x{p}")));
        }
        if mask.shape() != (n, p) {
            return Err(Error::invalid(format!(
                "mask shape {:?} does not match values shape {:?}",
                mask.shape(),
                (n, p)
            )));
        }
        if response.len() != n {
            return Err(Error::invalid(format!(
                "response has {} entries, expected {n}",
                response.len()
            )));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("response entry {i} is not finite")));
        }
        for (v, &m) in values.iter().zip(mask.iter()) {
            if m && !v.is_finite() {
                return Err(Error::invalid("observed feature value is not finite"));
            }
        }
        let missing_rate = count_missing(&mask) as f64 / (n * p) as f64;
        if missing_rate >= 1.0 {
            return Err(Error::invalid("every feature entry is missing"));
        }
        Ok(Self {
            values,
            mask,
            response,
            missing_rate,
        })
    }

    /// Fully observed task.
    pub fn complete(values: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, mask, response)
    }

    /// Overrides the mask-estimated missing rate with a known value.
    pub fn with_missing_rate(mut self, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::invalid(format!("missing rate {rho} outside [0, 1)")));
        }
        self.missing_rate = rho;
        Ok(self)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn missing_rate(&self) -> f64 {
        self.missing_rate
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[(row, col)]
    }

    pub fn missing_count(&self) -> usize {
        count_missing(&self.mask)
    }
}

fn count_missing(mask: &DMatrix<bool>) -> usize {
    mask.iter().filter(|&&m| !m).count()
}

fn check_columns(mask: &DMatrix<bool>) -> Result<()> {
    match mask.column_iter().position(|c| c.iter().all(|&m| !m)) {
        Some(column) => Err(Error::DegenerateColumn {
            column,
            reason: "no observed entries".into(),
        }),
        None => Ok(()),
    }
}

/// Fraction of unobserved entries in `mask`.
pub fn missing_rate(mask: &DMatrix<bool>) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::invalid("mask is empty"));
    }
    check_columns(mask)?;
    Ok(count_missing(mask) as f64 / mask.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentKind {
    Empirical,
    Rlgr,
    Rlgr1,
}

/// Eigenvalue thresholding rule used by the R-LGR1 estimator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdVariant {
    /// `u - d` above `d`, `0` inside `(-d, d)`, `d - u` below `-d`.
    /// Negative eigenvalues are reflected, so the output is nonnegative.
    #[default]
    Reflect,
    /// Ordinary soft thresholding, `u + d` below `-d`.
    Standard,
}

/// A `(Gamma, gamma)` pair consumed by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPair {
    gamma_mat: DMatrix<f64>,
    gamma_vec: DVector<f64>,
    kind: MomentKind,
}

impl MomentPair {
    /// Symmetrizes `gamma_mat` and checks dimensions.
    pub fn new(gamma_mat: DMatrix<f64>, gamma_vec: DVector<f64>, kind: MomentKind) -> Result<Self> {
        let p = gamma_vec.len();
        if gamma_mat.shape() != (p, p) {
            return Err(Error::invalid(format!(
                "gamma_mat shape {:?} does not match gamma_vec length {p}",
                gamma_mat.shape()
            )));
        }
        Ok(Self {
            gamma_mat: symmetrize(gamma_mat),
            gamma_vec,
            kind,
        })
    }

    pub fn gamma_mat(&self) -> &DMatrix<f64> {
        &self.gamma_mat
    }

    pub fn gamma_vec(&self) -> &DVector<f64> {
        &self.gamma_vec
    }

    pub fn kind(&self) -> MomentKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.gamma_vec.len()
    }

    /// Multiplies both moments by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            gamma_mat: &self.gamma_mat * c,
            gamma_vec: &self.gamma_vec * c,
            kind: self.kind,
        }
    }
}

/// Replaces `a` with `(a + a^T) / 2` so the result is exactly symmetric.
pub fn symmetrize(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Zero-fills missing entries and divides observed ones by `1 - rho`.
pub fn zero_fill_scale(data: &MaskedTaskData) -> Result<DMatrix<f64>> {
    check_columns(data.mask())?;
    let rho = data.missing_rate();
    let scale = 1.0 - rho;
    Ok(DMatrix::from_fn(data.n_samples(), data.n_features(), |r, c| {
        if data.mask[(r, c)] {
            data.values[(r, c)] / scale
        } else {
            0.0
        }
    }))
}

// X^T X / n and X^T y / n; shared by the empirical and plug-in paths so that
// rho = 0 produces bit-identical results.
fn gram_moments(x: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = x.nrows() as f64;
    (x.tr_mul(x) / n, x.tr_mul(y) / n)
}

pub fn empirical_moments(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<MomentPair> {
    if x.nrows() == 0 {
        return Err(Error::invalid("empirical moments need at least one row"));
    }
    if y.len() != x.nrows() {
        return Err(Error::invalid(format!(
            "response has {} entries, expected {}",
            y.len(),
            x.nrows()
        )));
    }
    let (g, v) = gram_moments(x, y);
    MomentPair::new(g, v, MomentKind::Empirical)
}

pub fn plugin_moments_rlgr(data: &MaskedTaskData) -> Result<MomentPair> {
    let z = zero_fill_scale(data)?;
    let rho = data.missing_rate();
    let (mut g, v) = gram_moments(&z, data.response());
    for j in 0..g.nrows() {
        let d = g[(j, j)];
        g[(j, j)] = d - rho * d;
    }
    MomentPair::new(g, v, MomentKind::Rlgr)
}

/// Element-wise eigenvalue threshold.
///
/// With `delta == 0` the map is the identity for both variants, so the R-LGR1
/// estimate reduces to the R-LGR one.
pub fn eig_soft_threshold(eigenvalues: &DVector<f64>, delta: f64, variant: ThresholdVariant) -> DVector<f64> {
    assert!(delta >= 0.0, "threshold must be nonnegative, got {delta}");
    if delta == 0.0 {
        return eigenvalues.clone();
    }
    eigenvalues.map(|u| {
        if u >= delta {
            u - delta
        } else if u <= -delta {
            match variant {
                ThresholdVariant::Reflect => delta - u,
                ThresholdVariant::Standard => u + delta,
            }
        } else {
            0.0
        }
    })
}

/// Applies [`eig_soft_threshold`] to the spectrum of an existing estimate.
/// `gamma_vec` is carried over unchanged.
pub fn threshold_moments(base: &MomentPair, delta: f64, variant: ThresholdVariant) -> Result<MomentPair> {
    if !(delta >= 0.0) {
        return Err(Error::invalid(format!("delta must be nonnegative, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(MomentPair {
            kind: MomentKind::Rlgr1,
            ..base.clone()
        });
    }
    let eig = SymmetricEigen::new(base.gamma_mat.clone());
    let d = eig_soft_threshold(&eig.eigenvalues, delta, variant);
    let q = &eig.eigenvectors;
    let scaled_q = DMatrix::from_fn(q.nrows(), q.ncols(), |r, c| q[(r, c)] * d[c]);
    let g = scaled_q * q.transpose();
    MomentPair::new(g, base.gamma_vec.clone(), MomentKind::Rlgr1)
}

pub fn plugin_moments_rlgr1(data: &MaskedTaskData, delta: f64) -> Result<MomentPair> {
    plugin_moments_rlgr1_with(data, delta, ThresholdVariant::Reflect)
}

pub fn plugin_moments_rlgr1_with(
    data: &MaskedTaskData,
    delta: f64,
    variant: ThresholdVariant,
) -> Result<MomentPair> {
    threshold_moments(&plugin_moments_rlgr(data)?, delta, variant)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sorted_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

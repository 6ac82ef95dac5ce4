//! Graph-regularized multi-task LASSO for data with missing features.
//!
//! Each task `i` has a design matrix `X_i` with missing entries and a complete
//! response `y_i`. Instead of imputing `X_i`, the plug-in approach replaces
//! the sufficient statistics `X_i^T X_i / n_i` and `X_i^T y_i / n_i` of the
//! least-squares loss by missing-data corrected estimates, then solves
//!
//! ```text
//! min_W  sum_i [ 1/2 W_i^T G_i W_i - W_i^T g_i ] + mu/2 |W|_1 + lambda/2 |W R|_F^2
//! ```
//!
//! with `R` the signed incidence matrix of a task-relatedness graph.
//!
//! Modules:
//! - [`taskgraph`]: task graph, incidence matrix, Laplacian.
//! - [`estimators`]: empirical, R-LGR and R-LGR1 moment estimates.
//! - [`baselines`]: mean imputation and low-rank completion.
//! - [`solver`]: proximal gradient with backtracking, objective, prediction.
//! - [`dataio`]: synthetic data, MCAR masking, CSV I/O, metrics, Weibull fits.
//! - [`bench`]: config-driven sweeps, grid tuning, result tables, CLI.

pub mod baselines;
pub mod bench;
pub mod dataio;
pub mod error;
pub mod estimators;
pub mod solver;
pub mod taskgraph;

pub use error::{Error, Result};
pub use estimators::{MaskedTaskData, MomentKind, MomentPair, ThresholdVariant};
pub use solver::{fit, Hyperparams, ModelMatrix, SolverReport, SolverSettings};
pub use taskgraph::{IncidenceMatrix, TaskGraph};

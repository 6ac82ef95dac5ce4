//! Data generation, ingestion and evaluation.

mod csvio;
mod mask;
mod metrics;
mod preprocess;
mod synth;
mod weibull;

pub use csvio::{load_task_csv, read_task_csv, write_task_csv, TARGET_COLUMN};
pub use mask::inject_mcar;
pub use metrics::{nmse_cov, nmse_model, prediction_nmse, rmse};
pub use preprocess::{apply_column_scales, column_norms, l2_normalize, train_test_split};
pub use synth::{
    alzheimer_like, synth_generate, CohortSpec, SupportSharing, SynthSpec, SyntheticGroundTruth,
};
pub use weibull::{weibull_fit, weibull_fit_with, weibull_pdf, WeibullFit, WeibullOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::MaskedTaskData;
use crate::taskgraph::TaskGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// Not split yet.
    Full,
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    Csv,
}

/// A set of tasks sharing one feature space, plus their relatedness graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub tasks: Vec<MaskedTaskData>,
    pub graph: TaskGraph,
    pub split: Split,
    pub provenance: Provenance,
}

impl DatasetBundle {
    pub fn new(tasks: Vec<MaskedTaskData>, graph: TaskGraph, split: Split, provenance: Provenance) -> Result<Self> {
        let Some(first) = tasks.first() else {
            return Err(Error::invalid("a bundle needs at least one task"));
        };
        let p = first.n_features();
        if let Some(i) = tasks.iter().position(|t| t.n_features() != p) {
            return Err(Error::invalid(format!(
                "task {i} has {} features, task 0 has {p}",
                tasks[i].n_features()
            )));
        }
        if graph.task_count() != tasks.len() {
            return Err(Error::invalid(format!(
                "graph has {} tasks, bundle has {}",
                graph.task_count(),
                tasks.len()
            )));
        }
        Ok(Self {
            tasks,
            graph,
            split,
            provenance,
        })
    }

    /// Replaces the graph; the task count must match.
    pub fn with_graph(self, graph: TaskGraph) -> Result<Self> {
        Self::new(self.tasks, graph, self.split, self.provenance)
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_features(&self) -> usize {
        self.tasks[0].n_features()
    }

    /// Missing fraction over all tasks' entries.
    pub fn overall_missing_rate(&self) -> f64 {
        let missing: usize = self.tasks.iter().map(|t| t.missing_count()).sum();
        let total: usize = self.tasks.iter().map(|t| t.n_samples() * t.n_features()).sum();
        missing as f64 / total as f64
    }
}

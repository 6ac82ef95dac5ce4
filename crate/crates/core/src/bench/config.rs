//! Declarative experiment description, read from TOML.
//!
//! ```toml
//! name = "synthetic"
//! methods = ["mean-impute", "mf-lgr", "rlgr", "rlgr1"]
//! missing_levels = [0.05, 0.1, 0.2, 0.3, 0.4]
//! replications = 20
//! base_seed = 2018
//!
//! [data]
//! source = "synthetic"   # or "cohort", "csv"
//! p = 50
//! tasks = 5
//! n_per_task = 100
//! sparsity = 7
//! noise_std = 0.1
//!
//! [graph]
//! kind = "chain"         # or kind = "edges", edges = [[1, 2], [2, 3]]
//! ```
//!
//! Every other table (`grid`, `solver`, `completion`, `split`, `output`) is
//! optional and falls back to the defaults below.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::{CohortSpec, SupportSharing, SynthSpec};
use crate::error::{Error, Result};
use crate::estimators::ThresholdVariant;
use crate::solver::SolverSettings;
use crate::taskgraph::TaskGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mean-impute")]
    MeanImpute,
    #[serde(rename = "mf-lgr")]
    MfLgr,
    #[serde(rename = "rlgr")]
    Rlgr,
    #[serde(rename = "rlgr1")]
    Rlgr1,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::MeanImpute, Method::MfLgr, Method::Rlgr, Method::Rlgr1];

    /// Tag used in config files, CSV output and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            Method::MeanImpute => "mean-impute",
            Method::MfLgr => "mf-lgr",
            Method::Rlgr => "rlgr",
            Method::Rlgr1 => "rlgr1",
        }
    }

    /// Label used in printed tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::MeanImpute => "Mean-Impute",
            Method::MfLgr => "MF-LGR",
            Method::Rlgr => "R-LGR",
            Method::Rlgr1 => "R-LGR1",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(tag))
            .ok_or_else(|| Error::Config(format!("unknown method `{tag}`")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    /// Fresh Gaussian data per replication; scored on model recovery.
    Synthetic {
        #[serde(flatten)]
        spec: SynthSpec,
        /// Size of the complete held-out sample per task used for prediction
        /// metrics. Defaults to `n_per_task`.
        #[serde(default)]
        test_samples: Option<usize>,
    },
    /// One cohort dataset generated from `dataset_seed`; replications vary
    /// the added missingness and the train/test split.
    Cohort {
        #[serde(flatten)]
        spec: CohortSpec,
        #[serde(default)]
        dataset_seed: u64,
    },
    /// Per-task CSV files; replications vary added missingness and the split.
    Csv { paths: Vec<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphSpec {
    /// Chain over all tasks in order.
    Chain,
    /// Explicit 1-based edge list.
    Edges { edges: Vec<(usize, usize)> },
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec::Chain
    }
}

impl GraphSpec {
    pub fn build(&self, task_count: usize) -> Result<TaskGraph> {
        match self {
            GraphSpec::Chain => TaskGraph::chain(task_count),
            GraphSpec::Edges { edges } => TaskGraph::from_edges(task_count, edges),
        }
        .map_err(|e| Error::Config(format!("graph: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuningMode {
    /// Separate hyperparameters for every missing level.
    PerLevel,
    /// One choice for all levels, scored on the mean over levels.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    ModelNmse,
    PredictionNmse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub delta: Vec<f64>,
    pub rank: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        let log = vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];
        Self {
            mu: log.clone(),
            lambda: log,
            delta: vec![0.0, 1e-3, 1e-2, 1e-1, 1.0],
            rank: vec![2, 5, 10],
        }
    }
}

/// Alternating-least-squares settings shared by every completion rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub ridge: f64,
}

impl Default for CompletionSettings {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
            ridge: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    /// l2-normalize feature columns with training norms.
    pub normalize: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
        }
    }
}

fn default_tuning_replications() -> usize {
    3
}

fn default_tuning() -> TuningMode {
    TuningMode::PerLevel
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub data: DataSource,
    #[serde(default)]
    pub graph: GraphSpec,
    pub methods: Vec<Method>,
    pub missing_levels: Vec<f64>,
    pub replications: usize,
    #[serde(default = "default_tuning_replications")]
    pub tuning_replications: usize,
    #[serde(default = "default_tuning")]
    pub tuning: TuningMode,
    /// Defaults to model NMSE for synthetic data, prediction NMSE otherwise.
    #[serde(default)]
    pub criterion: Option<Criterion>,
    #[serde(default)]
    pub threshold_variant: ThresholdVariant,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub completion: CompletionSettings,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative CSV paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (DataSource::Csv { paths }, Some(base)) = (&mut cfg.data, path.parent()) {
            for p in paths.iter_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.missing_levels.is_empty() {
            return bad("missing_levels must not be empty".into());
        }
        if let Some(l) = self.missing_levels.iter().find(|l| !(0.0..1.0).contains(*l)) {
            return bad(format!("missing level {l} outside [0, 1)"));
        }
        if self.replications == 0 || self.tuning_replications == 0 {
            return bad("replications and tuning_replications must be at least 1".into());
        }
        let g = &self.grid;
        if g.mu.is_empty() || g.lambda.is_empty() {
            return bad("grid.mu and grid.lambda must not be empty".into());
        }
        if self.methods.contains(&Method::Rlgr1) && g.delta.is_empty() {
            return bad("grid.delta must not be empty when rlgr1 is run".into());
        }
        if self.methods.contains(&Method::MfLgr) && g.rank.is_empty() {
            return bad("grid.rank must not be empty when mf-lgr is run".into());
        }
        let nonneg = g.mu.iter().chain(&g.lambda).chain(&g.delta).all(|v| v.is_finite() && *v >= 0.0);
        if !nonneg {
            return bad("grid values must be finite and nonnegative".into());
        }
        if g.rank.contains(&0) {
            return bad("grid.rank entries must be positive".into());
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return bad("split.train_fraction must lie in (0, 1)".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iters == 0 {
            return bad("solver.tol must be > 0 and solver.max_iters >= 1".into());
        }
        match &self.data {
            DataSource::Csv { paths } if paths.is_empty() => bad("data.paths must not be empty".into()),
            DataSource::Synthetic { spec, .. } if spec.tasks == 0 => bad("data.tasks must be >= 1".into()),
            _ => Ok(()),
        }
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion.unwrap_or(match self.data {
            DataSource::Synthetic { .. } => Criterion::ModelNmse,
            _ => Criterion::PredictionNmse,
        })
    }

    /// Short hash of every field that affects results. The output
    /// directory does not take part.
    pub fn hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.output = OutputSpec::default();
        semantic.criterion = Some(self.criterion());
        let value = serde_json::to_value(&semantic).expect("config serializes");
        let digest = Sha256::digest(value.to_string().as_bytes());
        hex::encode(&digest[..6])
    }

    /// Desk-scale version of the synthetic missing-data sweep.
    pub fn synthetic_default() -> Self {
        Self {
            name: "synthetic".into(),
            data: DataSource::Synthetic {
                spec: SynthSpec {
                    support: SupportSharing::Partial,
                    ..SynthSpec::default()
                },
                test_samples: None,
            },
            graph: GraphSpec::Chain,
            methods: Method::ALL.to_vec(),
            missing_levels: vec![0.05, 0.1, 0.2, 0.3, 0.4],
            replications: 20,
            tuning_replications: default_tuning_replications(),
            tuning: TuningMode::PerLevel,
            criterion: None,
            threshold_variant: ThresholdVariant::Reflect,
            base_seed: 2018,
            grid: GridSpec::default(),
            solver: SolverSettings::default(),
            completion: CompletionSettings::default(),
            split: SplitSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        methods = ["rlgr", "mean-impute"]
        missing_levels = [0.1, 0.2]
        replications = 2

        [data]
        source = "synthetic"
        p = 10
        tasks = 3
        n_per_task = 20
        sparsity = 2
        noise_std = 0.1
    "#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.methods, vec![Method::Rlgr, Method::MeanImpute]);
        assert_eq!(cfg.tuning_replications, 3);
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.criterion(), Criterion::ModelNmse);
        assert_eq!(cfg.graph, GraphSpec::Chain);
        assert_eq!(cfg.solver.max_iters, 5000);
    }

    #[test]
    fn parses_edge_list_and_csv_source() {
        let text = r#"
            methods = ["rlgr1"]
            missing_levels = [0.0]
            replications = 1
            [data]
            source = "csv"
            paths = ["a.csv", "b.csv", "c.csv"]
            [graph]
            kind = "edges"
            edges = [[1, 2], [1, 3]]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.criterion(), Criterion::PredictionNmse);
        let g = cfg.graph.build(3).unwrap();
        assert_eq!(g.edges_one_based(), vec![(1, 2), (1, 3)]);
    }

    #[test]
    fn rejects_invalid_configs() {
        let no_methods = MINIMAL.replace(r#"["rlgr", "mean-impute"]"#, "[]");
        assert!(matches!(ExperimentConfig::from_toml_str(&no_methods), Err(Error::Config(_))));
        let bad_level = MINIMAL.replace("[0.1, 0.2]", "[0.1, 1.0]");
        assert!(ExperimentConfig::from_toml_str(&bad_level).is_err());
        let zero_reps = MINIMAL.replace("replications = 2", "replications = 0");
        assert!(ExperimentConfig::from_toml_str(&zero_reps).is_err());
        let unknown = MINIMAL.replace(r#""rlgr","#, r#""lasso","#);
        assert!(ExperimentConfig::from_toml_str(&unknown).is_err());
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let a = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());

        let mut c = a.clone();
        c.base_seed += 1;
        assert_ne!(a.hash(), c.hash());
        let mut d = a.clone();
        d.grid.mu.push(100.0);
        assert_ne!(a.hash(), d.hash());
        let mut e = a.clone();
        e.solver.tol = 1e-7;
        assert_ne!(a.hash(), e.hash());

        // An explicit default is the same experiment as an omitted one.
        let explicit = format!("tuning_replications = 3\n{MINIMAL}");
        assert_eq!(a.hash(), ExperimentConfig::from_toml_str(&explicit).unwrap().hash());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::synthetic_default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn method_tags() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.tag()).unwrap(), m);
        }
        assert!(Method::parse("lasso").is_err());
    }
}

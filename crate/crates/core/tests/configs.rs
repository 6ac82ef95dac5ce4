//! The committed experiment configs parse and validate.

use std::path::Path;

use rlgr::bench::{Criterion, DataSource, ExperimentConfig, Method, TuningMode};

fn load(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn synthetic_config_matches_builtin_defaults() {
    let cfg = load("synthetic.toml");
    assert_eq!(cfg.hash(), ExperimentConfig::synthetic_default().hash());
    assert_eq!(cfg.tuning, TuningMode::PerLevel);
    assert_eq!(cfg.criterion(), Criterion::ModelNmse);
}

#[test]
fn every_committed_config_loads() {
    for name in ["synthetic.toml", "synthetic_quick.toml", "cohort.toml", "csv.toml"] {
        let cfg = load(name);
        assert_eq!(cfg.methods.len(), Method::ALL.len(), "{name}");
    }
}

#[test]
fn csv_paths_resolve_against_the_config_directory() {
    let cfg = load("csv.toml");
    let DataSource::Csv { paths } = &cfg.data else {
        panic!("csv.toml should use a csv source");
    };
    assert!(paths[0].ends_with("configs/data/cohort_task1.csv"));
    assert!(paths[0].is_absolute());
}

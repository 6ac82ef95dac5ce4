//! Sweep-level behaviour: tuning invariants and per-row error handling.

use rlgr::bench::{
    run_sweep_with, tune_grid, Candidate, DataSource, ExperimentConfig, GridSpec, Method, TuningChoice,
};
use rlgr::dataio::SynthSpec;

fn config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::synthetic_default();
    cfg.data = DataSource::Synthetic {
        spec: SynthSpec {
            p: 15,
            tasks: 3,
            n_per_task: 25,
            sparsity: 3,
            ..SynthSpec::default()
        },
        test_samples: None,
    };
    cfg.methods = vec![Method::Rlgr, Method::Rlgr1];
    cfg.replications = 2;
    cfg.tuning_replications = 2;
    cfg.grid = GridSpec {
        mu: vec![1e-3, 1e-2, 1e-1],
        lambda: vec![1e-2, 1.0],
        delta: vec![0.0, 1e-2, 1e-1, 1.0],
        rank: vec![2],
    };
    cfg
}

#[test]
fn thresholded_method_never_tunes_worse_than_plain_plugin() {
    let cfg = config();
    for level in [0.1, 0.3, 0.5] {
        let plain = tune_grid(&cfg, Method::Rlgr, level).unwrap();
        let thresholded = tune_grid(&cfg, Method::Rlgr1, level).unwrap();
        assert!(
            thresholded.score <= plain.score,
            "level {level}: {} > {}",
            thresholded.score,
            plain.score
        );
    }
}

#[test]
fn degenerate_replications_become_rows_without_metrics() {
    let mut cfg = config();
    // Three rows per task and 60% missing: some columns lose every entry.
    cfg.data = DataSource::Synthetic {
        spec: SynthSpec {
            p: 15,
            tasks: 3,
            n_per_task: 3,
            sparsity: 3,
            ..SynthSpec::default()
        },
        test_samples: Some(10),
    };
    cfg.missing_levels = vec![0.6];
    cfg.replications = 6;
    let fixed = |method| TuningChoice {
        method,
        level: None,
        candidate: Candidate {
            mu: 0.1,
            lambda: 0.1,
            delta: 0.1,
            rank: None,
        },
        score: 0.0,
        grid_size: 1,
        degenerate_points: 0,
    };
    let out = run_sweep_with(&cfg, vec![fixed(Method::Rlgr), fixed(Method::Rlgr1)]).unwrap();
    assert_eq!(out.rows.len(), 12);
    let failed: Vec<_> = out.rows.iter().filter(|r| r.error.is_some()).collect();
    assert!(!failed.is_empty());
    for r in failed {
        assert!(r.nmse_w.is_none() && r.prediction_nmse.is_none() && r.converged.is_none());
        assert!(r.error.as_deref().unwrap().contains("degenerate"));
    }
}

#[test]
fn missing_choices_are_a_config_error() {
    let cfg = config();
    let err = run_sweep_with(&cfg, vec![]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

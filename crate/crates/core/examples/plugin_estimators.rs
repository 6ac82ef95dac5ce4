//! Compares the plug-in moment estimates with the complete-data moments on
//! one task with 30% of its features removed.
//!
//! cargo run --example plugin_estimators

use nalgebra::DMatrix;
use rlgr::dataio::{inject_mcar, nmse_cov, synth_generate, SynthSpec};
use rlgr::estimators::{empirical_moments, min_eigenvalue, plugin_moments_rlgr, threshold_moments};
use rlgr::{TaskGraph, ThresholdVariant};

fn main() -> rlgr::Result<()> {
    let spec = SynthSpec {
        p: 20,
        tasks: 1,
        n_per_task: 60,
        sparsity: 4,
        ..SynthSpec::default()
    };
    let graph = TaskGraph::chain(1)?;
    let (complete, _) = synth_generate(&spec, &graph, 3)?;
    let masked = inject_mcar(&complete, 0.3, 4)?;
    let task = &masked.tasks[0];
    println!("missing rate {:.3}", task.missing_rate());

    let truth = empirical_moments(complete.tasks[0].values(), complete.tasks[0].response())?;
    let reference = [truth.gamma_mat().clone()];
    let rlgr = plugin_moments_rlgr(task)?;
    println!(
        "R-LGR     : covariance NMSE {:.4}, min eigenvalue {:+.4}",
        nmse_cov(&[rlgr.gamma_mat().clone()], &reference)?,
        min_eigenvalue(rlgr.gamma_mat())
    );
    for delta in [0.0, 0.01, 0.1, 1.0] {
        let t = threshold_moments(&rlgr, delta, ThresholdVariant::Reflect)?;
        let g: DMatrix<f64> = t.gamma_mat().clone();
        println!(
            "R-LGR1 d={delta:<4}: covariance NMSE {:.4}, min eigenvalue {:+.4}",
            nmse_cov(&[g.clone()], &reference)?,
            min_eigenvalue(&g)
        );
    }
    Ok(())
}

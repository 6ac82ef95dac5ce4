//! Runs a synthetic missing-data sweep from a config file and writes the
//! result tables.
//!
//! cargo run --release --example synthetic_sweep -- configs/synthetic_quick.toml

use std::path::PathBuf;

use rlgr::bench::{aggregate, emit_results, run_sweep, ExperimentConfig};

fn main() -> rlgr::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/synthetic_quick.toml")));
    let cfg = ExperimentConfig::load(&path)?;
    println!("config {} (hash {})", path.display(), cfg.hash());

    let outcome = run_sweep(&cfg)?;
    for c in &outcome.choices {
        println!(
            "tuned {:<12} level {:<5} mu {:<7} lambda {:<7} delta {:<6} rank {:?}",
            c.method.label(),
            c.level.map_or("all".into(), |l| l.to_string()),
            c.candidate.mu,
            c.candidate.lambda,
            c.candidate.delta,
            c.candidate.rank
        );
    }
    println!("\n{:<12} {:>7} {:>14} {:>14}", "method", "missing", "model NMSE", "cov NMSE");
    for a in aggregate(&outcome.rows) {
        println!(
            "{:<12} {:>7.2} {:>8.4} ±{:.4} {:>8.4} ±{:.4}",
            a.method.label(),
            a.missing_fraction,
            a.nmse_w.mean.unwrap_or(f64::NAN),
            a.nmse_w.std_error.unwrap_or(f64::NAN),
            a.nmse_gamma.mean.unwrap_or(f64::NAN),
            a.nmse_gamma.std_error.unwrap_or(f64::NAN),
        );
    }
    let files = emit_results(&outcome, &cfg, &cfg.output.dir)?;
    println!("\nwrote {}\nwrote {}", files.results.display(), files.aggregate.display());
    Ok(())
}

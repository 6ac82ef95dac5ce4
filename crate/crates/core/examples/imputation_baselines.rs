//! Fills a masked low-rank matrix with column means and with alternating
//! least squares, and reports the error on the hidden entries.
//!
//! cargo run --example imputation_baselines

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rlgr::baselines::{mean_impute, mf_complete, CompletionConfig};
use rlgr::MaskedTaskData;

fn main() -> rlgr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, p, rank) = (60, 30, 3);
    let u = DMatrix::from_fn(n, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    let v = DMatrix::from_fn(p, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = &u * v.transpose();
    let mask = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() > 0.3);
    let data = MaskedTaskData::new(x.clone(), mask.clone(), DVector::zeros(n))?;

    let hidden_error = |filled: &DMatrix<f64>| {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..p {
                if !mask[(i, j)] {
                    num += (filled[(i, j)] - x[(i, j)]).powi(2);
                    den += x[(i, j)].powi(2);
                }
            }
        }
        num / den
    };

    println!("hidden entries: {}", data.missing_count());
    println!("mean imputation   relative error {:.4}", hidden_error(&mean_impute(&data).values));
    for r in [1, 3, 5] {
        let c = mf_complete(&data, &CompletionConfig::with_rank(r))?;
        println!(
            "ALS rank {r:<2}       relative error {:.4} ({} sweeps, converged {})",
            hidden_error(&c.values),
            c.iterations,
            c.converged
        );
    }
    Ok(())
}

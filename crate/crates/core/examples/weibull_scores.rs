//! Fits a Weibull distribution to each visit's scores and prints a coarse
//! text rendering of the fitted densities.
//!
//! cargo run --example weibull_scores

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Weibull};
use rlgr::dataio::{weibull_fit, weibull_pdf};

fn main() -> rlgr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    // Scores drift upward and spread out over visits.
    let visits = [(2.5, 10.0), (2.2, 11.5), (2.0, 13.0), (1.8, 15.0)];
    let mut fits = Vec::new();
    for (i, &(shape, scale)) in visits.iter().enumerate() {
        let scores: Vec<f64> = Weibull::new(scale, shape)
            .expect("valid parameters")
            .sample_iter(&mut rng)
            .take(400)
            .collect();
        let f = weibull_fit(&scores)?;
        println!(
            "visit {}: true (k={shape}, scale={scale}) fitted (k={:.3}, scale={:.3}) in {} steps",
            i + 1,
            f.shape,
            f.scale,
            f.iterations
        );
        fits.push(f);
    }
    println!();
    for x in (0..=40).step_by(4).map(f64::from) {
        let bars: Vec<String> = fits
            .iter()
            .map(|f| "#".repeat((weibull_pdf(x, f.shape, f.scale) * 200.0).round() as usize))
            .map(|b| format!("{b:<18}"))
            .collect();
        println!("{x:>4} {}", bars.join("|"));
    }
    Ok(())
}

//! Two-parameter Weibull maximum likelihood.
//!
//! For fixed shape `k` the scale MLE is `(mean x^k)^(1/k)`; substituting it
//! leaves the profile equation
//!
//! ```text
//! h(k) = sum x^k ln x / sum x^k - 1/k - mean(ln x) = 0
//! ```
//!
//! which is increasing in `k`. It is solved in log-centred coordinates
//! `u = ln x - mean(ln x)` so that the fit is exactly scale-equivariant and
//! does not overflow for large `k`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullFit {
    pub shape: f64,
    pub scale: f64,
    pub iterations: usize,
    /// The shape hit `max_shape` (near-constant samples).
    pub capped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub max_shape: f64,
}

impl Default for WeibullOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 200,
            max_shape: 1e4,
        }
    }
}

pub fn weibull_fit(samples: &[f64]) -> Result<WeibullFit> {
    weibull_fit_with(samples, &WeibullOptions::default())
}

// Weighted mean and variance of u under weights exp(k u).
fn tilted_moments(u: &[f64], k: f64) -> (f64, f64, f64) {
    let m = u.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(k * v));
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for &v in u {
        let e = (k * v - m).exp();
        s0 += e;
        s1 += e * v;
        s2 += e * v * v;
    }
    let mean = s1 / s0;
    (mean, (s2 / s0 - mean * mean).max(0.0), m + s0.ln())
}

pub fn weibull_fit_with(samples: &[f64], opts: &WeibullOptions) -> Result<WeibullFit> {
    if samples.len() < 2 {
        return Err(Error::invalid("Weibull fit needs at least two samples"));
    }
    if let Some(bad) = samples.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("Weibull samples must be positive and finite, got {bad}")));
    }
    let n = samples.len() as f64;
    let logs: Vec<f64> = samples.iter().map(|v| v.ln()).collect();
    let log_mean = logs.iter().sum::<f64>() / n;
    let u: Vec<f64> = logs.iter().map(|l| l - log_mean).collect();

    let scale_for = |k: f64| {
        let (_, _, log_sum) = tilted_moments(&u, k);
        (log_mean + (log_sum - n.ln()) / k).exp()
    };
    let h = |k: f64| tilted_moments(&u, k).0 - 1.0 / k;

    if u.iter().all(|v| *v == 0.0) {
        return Ok(WeibullFit {
            shape: opts.max_shape,
            scale: log_mean.exp(),
            iterations: 0,
            capped: true,
        });
    }

    // Bracket the root: h -> -inf as k -> 0 and h is increasing.
    let mut lo = 1.0;
    while h(lo) > 0.0 {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(Error::NumericalFailure {
                iteration: 0,
                reason: "could not bracket the Weibull shape from below".into(),
            });
        }
    }
    let mut hi = lo;
    loop {
        hi *= 2.0;
        if hi >= opts.max_shape {
            if h(opts.max_shape) <= 0.0 {
                return Ok(WeibullFit {
                    shape: opts.max_shape,
                    scale: scale_for(opts.max_shape),
                    iterations: 0,
                    capped: true,
                });
            }
            hi = opts.max_shape;
            break;
        }
        if h(hi) > 0.0 {
            break;
        }
        lo = hi;
    }

    // Safeguarded Newton: fall back to bisection when the step leaves the bracket.
    let mut k = 0.5 * (lo + hi);
    for iter in 1..=opts.max_iters {
        let (mean, var, _) = tilted_moments(&u, k);
        let val = mean - 1.0 / k;
        if val > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let deriv = var + 1.0 / (k * k);
        let newton = k - val / deriv;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - k).abs() <= opts.tol * k.max(1.0) {
            return Ok(WeibullFit {
                shape: next,
                scale: scale_for(next),
                iterations: iter,
                capped: false,
            });
        }
        k = next;
    }
    Err(Error::NumericalFailure {
        iteration: opts.max_iters,
        reason: "Weibull shape did not converge".into(),
    })
}

/// Density `k/l (x/l)^(k-1) exp(-(x/l)^k)` for `x >= 0`.
pub fn weibull_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let z = x / scale;
    shape / scale * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
}

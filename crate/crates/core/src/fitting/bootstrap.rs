use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{FitResult, Trace};
use crate::error::{invalid, Result};

/// Residual bootstrap: refits `samples` synthetic traces built from the
/// fitted curve plus residuals drawn with replacement, and returns the
/// standard deviation of each parameter across the refits. Refits that
/// fail are dropped; at least two must succeed.
pub fn bootstrap_std<F>(trace: &Trace, fitted: &[f64], samples: usize, seed: u64, refit: F) -> Result<Vec<f64>>
where
    F: Fn(&Trace) -> Result<FitResult>,
{
    if fitted.len() != trace.len() {
        return Err(invalid("fitted", "length differs from trace"));
    }
    if samples < 2 {
        return Err(invalid("bootstrap", "need at least 2 samples"));
    }
    let resid: Vec<f64> = trace.y.iter().zip(fitted).map(|(y, f)| y - f).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(samples);
    for _ in 0..samples {
        let y = fitted
            .iter()
            .map(|f| f + resid[rng.random_range(0..resid.len())])
            .collect();
        let t = Trace {
            x: trace.x.clone(),
            y,
            sigma: trace.sigma.clone(),
        };
        if let Ok(fit) = refit(&t) {
            draws.push(fit.params);
        }
    }
    if draws.len() < 2 {
        return Err(invalid("bootstrap", "fewer than two refits succeeded"));
    }
    let n = draws.len() as f64;
    let m = draws[0].len();
    Ok((0..m)
        .map(|j| {
            let mean = draws.iter().map(|d| d[j]).sum::<f64>() / n;
            (draws.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .collect())
}

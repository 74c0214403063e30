use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::fitting::Trace;

/// Multiplies every `y` by `1 + sigma_rel·n` with `n` standard normal.
///
/// Draws come from ChaCha20 seeded with `seed_from_u64(seed)` and are
/// consumed in trace order, one per point, so the output depends only on
/// the trace, `sigma_rel` and `seed`.
pub fn inject_noise(trace: &Trace, sigma_rel: f64, seed: u64) -> Result<Trace> {
    let mut out = trace.clone();
    out.y = inject_noise_values(&trace.y, sigma_rel, seed)?;
    Ok(out)
}

/// Same draws as [`inject_noise`] applied to a bare slice.
pub fn inject_noise_values(values: &[f64], sigma_rel: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma_rel.is_finite() && sigma_rel >= 0.0) {
        return Err(invalid("noise.sigma_rel", "must be finite and >= 0"));
    }
    if sigma_rel == 0.0 {
        return Ok(values.to_vec());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(values
        .iter()
        .map(|y| {
            let n: f64 = rng.sample(StandardNormal);
            y * (1.0 + sigma_rel * n)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> Trace {
        Trace::series((0..200).map(f64::from).collect(), vec![2.0; 200], None).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        assert_eq!(inject_noise(&trace(), 0.0, 7).unwrap(), trace());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = inject_noise(&trace(), 0.05, 42).unwrap();
        let b = inject_noise(&trace(), 0.05, 42).unwrap();
        let c = inject_noise(&trace(), 0.05, 43).unwrap();
        let bits = |t: &Trace| t.y.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
        assert_eq!(a.x, trace().x);
    }

    #[test]
    fn relative_spread_matches_sigma() {
        let t = Trace::series((0..20000).map(f64::from).collect(), vec![3.0; 20000], None).unwrap();
        let n = inject_noise(&t, 0.02, 1).unwrap();
        let r: Vec<f64> = n.y.iter().map(|v| v / 3.0 - 1.0).collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let sd = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r.len() - 1) as f64).sqrt();
        // standard error of the sd estimate is ~0.02/sqrt(2·20000) = 1e-4
        assert!((sd - 0.02).abs() < 5e-4, "{sd}");
        assert!(mean.abs() < 5e-4);
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(inject_noise(&trace(), -0.1, 0).is_err());
    }
}

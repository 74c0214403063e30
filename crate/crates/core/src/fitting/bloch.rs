use rayon::prelude::*;

use super::{nlls_minimize, Bounds, FitResult, LmOptions, Trace};
use crate::cpt::{fluorescence, LambdaSystem};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BlochFitOptions {
    /// Allowed γ_g range, MHz.
    pub gamma_bounds: (f64, f64),
    /// Starting values tried for γ_g, MHz; the best by linear least squares wins.
    pub seeds: Vec<f64>,
    pub lm: LmOptions,
}

impl Default for BlochFitOptions {
    fn default() -> Self {
        Self {
            gamma_bounds: (0.0, 1000.0),
            seeds: vec![0.5, 2.0, 8.0, 32.0],
            lm: LmOptions::default(),
        }
    }
}

fn signal(fixed: &LambdaSystem, gamma_mhz: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let sys = fixed.with_gamma_g(gamma_mhz * 1e6);
    let d1 = sys.lasers[0].detuning;
    xs.par_iter().map(|&d2| fluorescence(&sys, d1, d2)).collect()
}

/// Best scale and offset for `y ≈ s·f + c`.
fn linear_fit(f: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = f.len() as f64;
    let (sf, sy) = (f.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sff = f.iter().map(|v| v * v).sum::<f64>();
    let sfy = f.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let det = n * sff - sf * sf;
    let (s, c) = if det.abs() > 0.0 {
        ((n * sfy - sf * sy) / det, (sy * sff - sf * sfy) / det)
    } else {
        (0.0, sy / n)
    };
    let res = f.iter().zip(y).map(|(a, b)| (b - s * a - c).powi(2)).sum();
    (s, c, res)
}

/// Fits γ_g with the rest of the Λ system fixed; the scan signal is modeled
/// as `scale·ρ_ee(δ₂; γ_g) + offset` with δ₂ on the trace x axis.
pub fn fit_bloch_model(trace: &Trace, fixed: &LambdaSystem, options: &BlochFitOptions) -> Result<FitResult> {
    fixed.validate()?;
    let (lo, hi) = options.gamma_bounds;
    if !(lo >= 0.0 && hi > lo) {
        return Err(invalid("gamma_bounds", "need 0 <= lo < hi"));
    }
    let norm = trace.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if norm == 0.0 {
        return Err(invalid("trace", "signal is identically zero"));
    }
    let scaled = Trace {
        x: trace.x.clone(),
        y: trace.y.iter().map(|v| v / norm).collect(),
        sigma: trace.sigma.as_ref().map(|s| s.iter().map(|v| v / norm).collect()),
    };

    let mut best: Option<(f64, f64, f64, f64)> = None;
    for &g in &options.seeds {
        let g = g.clamp(lo, hi);
        let f = signal(fixed, g, &scaled.x)?;
        let (s, c, res) = linear_fit(&f, &scaled.y);
        if best.is_none_or(|b| res < b.3) {
            best = Some((g, s, c, res));
        }
    }
    let (g0, s0, c0, _) = best.ok_or_else(|| invalid("seeds", "must not be empty"))?;

    let model = |p: &[f64], xs: &[f64]| -> Result<Vec<f64>> {
        Ok(signal(fixed, p[0], xs)?.iter().map(|v| p[1] * v + p[2]).collect())
    };
    let bounds = Bounds(vec![
        (lo, hi),
        (f64::NEG_INFINITY, f64::INFINITY),
        (f64::NEG_INFINITY, f64::INFINITY),
    ]);
    let mut fit = nlls_minimize(
        model,
        &scaled,
        &["gamma_g_MHz", "scale", "offset"],
        &[g0, s0, c0],
        Some(&bounds),
        &options.lm,
    )?;
    fit.scale_param(1, norm);
    fit.scale_param(2, norm);
    for v in fit.fitted.iter_mut() {
        *v *= norm;
    }
    fit.residual_norm *= norm;
    let gamma = fit.params[0] * 1e6;
    fit.gamma_g = Some((gamma, fit.uncertainties[0] * 1e6));
    fit.t2_star = Some(1.0 / gamma);
    Ok(fit)
}

//! Nonlinear least squares and the three model fits built on it: Lorentzian
//! dips, the Λ-system Bloch model and the overlap×Boltzmann width model.

mod bloch;
mod bootstrap;
mod dip;
mod lm;
mod width;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Result};

pub use bloch::{fit_bloch_model, BlochFitOptions};
pub use bootstrap::bootstrap_std;
pub use dip::{fit_lorentzian_dip, lorentzian_dip};
pub use lm::{jacobian_forward, nlls_minimize, Bounds, LmOptions, MAX_DAMPING};
pub use width::{fit_width_model, PairSchedule};

/// Sampled data, optionally with per-point 1σ uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl Trace {
    /// At least five points, strictly monotone `x`.
    pub fn new(x: Vec<f64>, y: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        let t = Self::series(x, y, sigma)?;
        if t.x.len() < 5 {
            return Err(invalid("trace", "needs at least 5 points"));
        }
        Ok(t)
    }

    /// Like [`Trace::new`] without the minimum length, for short series such
    /// as width-versus-field data.
    pub fn series(x: Vec<f64>, y: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(invalid("trace", "x and y lengths differ"));
        }
        if let Some(s) = &sigma {
            if s.len() != x.len() {
                return Err(invalid("trace", "sigma length differs from x"));
            }
            if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(invalid("trace", "sigma must be finite and > 0"));
            }
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(invalid("trace", "values must be finite"));
        }
        let up = x.windows(2).all(|w| w[1] > w[0]);
        let down = x.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(invalid("trace", "x must be strictly monotone"));
        }
        Ok(Self { x, y, sigma })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Outcome of a least-squares fit. Uncertainties are 1σ from the linearized
/// covariance scaled by the residual variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub uncertainties: Vec<f64>,
    #[serde(skip)]
    pub covariance: DMatrix<f64>,
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Dip FWHM and its uncertainty, MHz.
    pub fwhm: Option<(f64, f64)>,
    /// Ground decoherence rate and its uncertainty, s⁻¹.
    pub gamma_g: Option<(f64, f64)>,
    /// 1/γ_g, s.
    pub t2_star: Option<f64>,
    pub r_squared: Option<f64>,
    /// Model evaluated at the estimate on the trace x values.
    #[serde(skip)]
    pub fitted: Vec<f64>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.params[i])
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.uncertainties[i])
    }

    /// Multiplies parameter `k` by `factor`, carrying its uncertainty and
    /// covariance row/column along. Used when a fit ran on rescaled data.
    pub(crate) fn scale_param(&mut self, k: usize, factor: f64) {
        self.params[k] *= factor;
        self.uncertainties[k] *= factor.abs();
        self.covariance.row_mut(k).scale_mut(factor);
        self.covariance.column_mut(k).scale_mut(factor);
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Flat `key = value` report, one line per quantity.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.names.iter().enumerate() {
            out.push_str(&format!(
                "{n} = {:.10e} +/- {:.3e}\n",
                self.params[i], self.uncertainties[i]
            ));
        }
        if let Some((w, e)) = self.fwhm {
            out.push_str(&format!("fwhm_MHz = {w:.10e} +/- {e:.3e}\n"));
        }
        if let Some((g, e)) = self.gamma_g {
            out.push_str(&format!("gamma_g_per_s = {g:.10e} +/- {e:.3e}\n"));
        }
        if let Some(t) = self.t2_star {
            out.push_str(&format!("t2_star_s = {t:.10e}\n"));
        }
        if let Some(r2) = self.r_squared {
            out.push_str(&format!("r_squared = {r2:.10}\n"));
        }
        out.push_str(&format!("residual_norm = {:.10e}\n", self.residual_norm));
        out.push_str(&format!("converged = {}\n", self.converged));
        out.push_str(&format!("iterations = {}\n", self.iterations));
        out
    }
}

/// Coefficient of determination of `fit` against `y`.
pub fn r_squared(y: &[f64], fit: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fit).map(|(a, b)| (a - b).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_validation() {
        assert!(Trace::new(vec![1.0, 2.0, 3.0], vec![0.0; 3], None).is_err());
        assert!(Trace::new(vec![1.0, 2.0, 2.0, 4.0, 5.0], vec![0.0; 5], None).is_err());
        assert!(Trace::new((0..5).map(f64::from).collect(), vec![0.0; 4], None).is_err());
        assert!(Trace::new((0..5).map(f64::from).rev().collect(), vec![0.0; 5], None).is_ok());
        assert!(Trace::series(vec![1.0, 2.0], vec![0.0; 2], None).is_ok());
        assert!(Trace::series(vec![1.0, 2.0], vec![0.0; 2], Some(vec![1.0, 0.0])).is_err());
    }

    #[test]
    fn r_squared_limits() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
        assert!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).abs() < 1e-15);
    }
}

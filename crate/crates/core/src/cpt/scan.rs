use rayon::prelude::*;

use super::{build_liouvillian, steady_state, LambdaSetup, LambdaSystem};
use crate::error::{invalid, Error, Result};
use crate::fitting::{fit_lorentzian_dip, FitResult, Trace};

/// Steady-state fluorescence (ρ_ee) over one or two detuning axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// Laser-1 detunings, MHz; a single entry for 1D scans.
    pub delta1: Vec<f64>,
    /// Laser-2 detunings, MHz.
    pub delta2: Vec<f64>,
    /// `signal[i][j]` at `(delta1[i], delta2[j])`.
    pub signal: Vec<Vec<f64>>,
    pub field: f64,
    pub powers: [f64; 2],
}

impl ScanResult {
    /// First row as a trace over δ₂.
    pub fn trace(&self) -> Result<Trace> {
        Trace::new(self.delta2.clone(), self.signal[0].clone(), None)
    }
}

/// Excited-state population at one detuning pair.
pub fn fluorescence(template: &LambdaSystem, delta1: f64, delta2: f64) -> Result<f64> {
    let sys = template.with_detunings(delta1, delta2);
    let rho = steady_state(&build_liouvillian(&sys))?;
    Ok(rho.excited_population().clamp(0.0, 1.0))
}

fn row(template: &LambdaSystem, delta1: f64, delta2: &[f64]) -> Result<Vec<f64>> {
    delta2
        .par_iter()
        .map(|&d2| fluorescence(template, delta1, d2))
        .collect()
}

/// Scans laser 2 with laser 1 held at its template detuning.
pub fn cpt_scan_1d(template: &LambdaSystem, delta2: &[f64]) -> Result<ScanResult> {
    if delta2.is_empty() {
        return Err(invalid("grids.detuning", "must not be empty"));
    }
    template.validate()?;
    let d1 = template.lasers[0].detuning;
    Ok(ScanResult {
        delta1: vec![d1],
        delta2: delta2.to_vec(),
        signal: vec![row(template, d1, delta2)?],
        field: template.field,
        powers: [template.lasers[0].power_ratio, template.lasers[1].power_ratio],
    })
}

pub fn cpt_scan_2d(template: &LambdaSystem, delta1: &[f64], delta2: &[f64]) -> Result<ScanResult> {
    if delta1.is_empty() || delta2.is_empty() {
        return Err(invalid("grids.detuning", "must not be empty"));
    }
    template.validate()?;
    let signal = delta1
        .par_iter()
        .map(|&d1| row(template, d1, delta2))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        delta1: delta1.to_vec(),
        delta2: delta2.to_vec(),
        signal,
        field: template.field,
        powers: [template.lasers[0].power_ratio, template.lasers[1].power_ratio],
    })
}

/// Points per detuning scan when measuring a dip width.
pub const DIP_SCAN_POINTS: usize = 201;

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Scans across two-photon resonance and fits a Lorentzian, adapting the
/// scan half-span to three FWHM until it stops moving.
pub fn measure_dip_width(sys: &LambdaSystem) -> Result<(FitResult, ScanResult)> {
    let center = sys.lasers[0].detuning;
    let mut half = 50.0;
    let mut last = None;
    for _ in 0..10 {
        let grid = linspace(center - half, center + half, DIP_SCAN_POINTS);
        let scan = cpt_scan_1d(sys, &grid)?;
        let fit = match fit_lorentzian_dip(&scan.trace()?) {
            Ok(f) => f,
            Err(Error::NoDip) if half < 1e5 => {
                half *= 4.0;
                continue;
            }
            Err(e) => return Err(e),
        };
        let w = fit.fwhm.map(|f| f.0).unwrap_or(f64::NAN);
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::NoDip);
        }
        let want = (3.0 * w).clamp(1e-3, 1e5);
        let settled = (want - half).abs() <= 0.1 * half;
        last = Some((fit, scan));
        if settled {
            break;
        }
        half = want;
    }
    last.ok_or(Error::NoDip)
}

/// One point of a width-versus-field sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthPoint {
    pub field: f64,
    pub fwhm: f64,
    pub fwhm_err: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WidthSweep {
    pub points: Vec<WidthPoint>,
    /// Fields where no width could be extracted, with the reason.
    pub skipped: Vec<(f64, String)>,
}

/// Dip FWHM at every field of `grid` with both lasers at `powers`. Points
/// whose Λ system or fit fails are skipped and logged.
pub fn dip_width_vs_field(setup: &LambdaSetup, grid: &[f64], powers: [f64; 2]) -> Result<WidthSweep> {
    if grid.is_empty() {
        return Err(invalid("grids.field", "must not be empty"));
    }
    let results: Vec<(f64, Result<FitResult>)> = grid
        .par_iter()
        .map(|&b| {
            let r = setup
                .lambda_at(b)
                .and_then(|sys| measure_dip_width(&sys.with_powers(powers)))
                .map(|(fit, _)| fit);
            (b, r)
        })
        .collect();
    let mut out = WidthSweep::default();
    for (b, r) in results {
        match r {
            Ok(fit) => {
                let (fwhm, fwhm_err) = fit.fwhm.unwrap_or((f64::NAN, f64::NAN));
                out.points.push(WidthPoint {
                    field: b,
                    fwhm,
                    fwhm_err,
                });
            }
            Err(e) => {
                log::warn!("skipping B = {b} T: {e}");
                out.skipped.push((b, e.to_string()));
            }
        }
    }
    log::info!(
        "width sweep: {} fields, {} skipped",
        out.points.len(),
        out.skipped.len()
    );
    Ok(out)
}

/// Finds the mutual laser dephasing rate (s⁻¹) at which the dip measured at
/// field `b` with the setup's laser powers has FWHM `target` MHz.
pub fn calibrate_laser_dephasing(setup: &LambdaSetup, b: f64, target: f64) -> Result<f64> {
    if !(target.is_finite() && target > 0.0) {
        return Err(invalid("target", "must be > 0"));
    }
    let base = setup.lambda_at(b)?;
    let width = |gl: f64| -> Result<f64> {
        let mut sys = base;
        sys.rates.gamma_laser_rel = gl;
        let (fit, _) = measure_dip_width(&sys)?;
        Ok(fit.fwhm.map(|f| f.0).unwrap_or(f64::NAN))
    };
    let (mut lo, mut hi) = (0.0, 1e9);
    let (w_lo, w_hi) = (width(lo)?, width(hi)?);
    if !(w_lo <= target && target <= w_hi) {
        return Err(Error::LaserCalibrationFailed {
            target,
            narrowest: w_lo,
            widest: w_hi,
        });
    }
    while hi - lo > 1e-7 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if width(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gl = 0.5 * (lo + hi);
    log::info!("laser dephasing {gl:.6e} s^-1 gives a {target} MHz dip at {b} T");
    Ok(gl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpt::RateSet;

    fn typical_scan() -> LambdaSystem {
        let mut rates = RateSet::default();
        rates.gamma_laser_rel = 6e5;
        LambdaSystem::bare([60.0, 40.0], [0.0, 0.0], rates)
    }

    #[test]
    fn dark_state_scan_reaches_zero() {
        let sys = LambdaSystem::bare([80.0, 50.0], [5.0, 0.0], RateSet::radiative_only(5.9e8));
        let grid = linspace(-20.0, 30.0, 51);
        let s = cpt_scan_1d(&sys, &grid).unwrap();
        let (k, min) = s.signal[0]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(*min < 1e-10);
        assert!((grid[k] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn undriven_second_arm_is_flat_zero() {
        let mut rates = RateSet::default();
        rates.gamma_ph = 0.0;
        let sys = LambdaSystem::bare([80.0, 0.0], [0.0, 0.0], rates);
        let s = cpt_scan_1d(&sys, &linspace(-50.0, 50.0, 11)).unwrap();
        assert!(s.signal[0].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn two_d_diagonal_is_dark() {
        let sys = LambdaSystem::bare([80.0, 50.0], [0.0, 0.0], RateSet::radiative_only(5.9e8));
        let axis = linspace(-30.0, 30.0, 7);
        let s = cpt_scan_2d(&sys, &axis, &axis).unwrap();
        for i in 0..axis.len() {
            assert!(s.signal[i][i] < 1e-10);
        }
        let one = cpt_scan_2d(&sys, &[10.0], &[-3.0]).unwrap();
        let line = cpt_scan_1d(&sys.with_detunings(10.0, 0.0), &[-3.0]).unwrap();
        assert_eq!(one.signal, line.signal);
    }

    #[test]
    fn dip_width_grows_with_gamma_g() {
        let mut last = 0.0;
        for gg in [0.1e6, 0.5e6, 2e6, 8e6, 20e6] {
            let (fit, _) = measure_dip_width(&typical_scan().with_gamma_g(gg)).unwrap();
            let w = fit.fwhm.unwrap().0;
            assert!(w > last, "{gg}: {w} <= {last}");
            last = w;
        }
    }

    #[test]
    fn dip_width_grows_with_power() {
        let mut last = 0.0;
        for scale in [0.5, 1.0, 2.0, 4.0] {
            let mut sys = typical_scan();
            sys.rabi = [60.0 * scale, 40.0 * scale];
            let w = measure_dip_width(&sys).unwrap().0.fwhm.unwrap().0;
            assert!(w > last);
            last = w;
        }
    }

    #[test]
    fn detuning_parity() {
        let mut rates = RateSet::default();
        rates.gamma_ph = 0.0;
        let sys = LambdaSystem::bare([70.0, 70.0], [0.0, 0.0], rates);
        for (d1, d2) in [(5.0, -3.0), (12.0, 40.0), (-7.0, 2.5)] {
            let a = fluorescence(&sys, d1, d2).unwrap();
            let b = fluorescence(&sys, -d1, -d2).unwrap();
            assert!((a - b).abs() < 1e-12 * a.max(1e-12), "{a} {b}");
        }
    }

    #[test]
    fn empty_grids_rejected() {
        assert!(cpt_scan_1d(&typical_scan(), &[]).is_err());
        assert!(cpt_scan_2d(&typical_scan(), &[1.0], &[]).is_err());
    }
}

use super::{nlls_minimize, Bounds, FitResult, LmOptions, Trace};
use crate::error::{Error, Result};

/// `y0 − A·(w/2)² / ((x − x0)² + (w/2)²)`; `p = [y0, A, x0, w]`.
pub fn lorentzian_dip(p: &[f64], x: f64) -> f64 {
    let hw2 = 0.25 * p[3] * p[3];
    p[0] - p[1] * hw2 / ((x - p[2]).powi(2) + hw2)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Crossing of `level` walking outward from `start` in direction `dir`,
/// linearly interpolated. Falls back to the trace edge.
fn crossing(x: &[f64], y: &[f64], start: usize, level: f64, dir: isize) -> f64 {
    let mut i = start as isize;
    loop {
        let j = i + dir;
        if j < 0 || j as usize >= x.len() {
            return x[i as usize];
        }
        let (a, b) = (i as usize, j as usize);
        if y[b] >= level {
            let t = (level - y[a]) / (y[b] - y[a]);
            return x[a] + t * (x[b] - x[a]);
        }
        i = j;
    }
}

/// Fits a Lorentzian dip. `y` is rescaled to [0, 1] before fitting so the
/// width is independent of signal scale and offset; reported `y0` and `A`
/// are in the original units.
pub fn fit_lorentzian_dip(trace: &Trace) -> Result<FitResult> {
    let n = trace.len();
    let (ymin, ymax) = trace
        .y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let kmin = (0..n)
        .min_by(|&a, &b| trace.y[a].total_cmp(&trace.y[b]))
        .ok_or(Error::NoDip)?;
    if kmin == 0 || kmin == n - 1 || ymax <= ymin {
        return Err(Error::NoDip);
    }
    let span = ymax - ymin;
    let y: Vec<f64> = trace.y.iter().map(|v| (v - ymin) / span).collect();
    let sigma = trace.sigma.as_ref().map(|s| s.iter().map(|v| v / span).collect());
    let scaled = Trace {
        x: trace.x.clone(),
        y: y.clone(),
        sigma,
    };

    let edge = 3.min(n / 2).max(1);
    let edges: Vec<f64> = y[..edge].iter().chain(&y[n - edge..]).copied().collect();
    let y0 = median(edges);
    let depth = (y0 - y[kmin]).max(1e-12);
    let half = y0 - 0.5 * depth;
    let left = crossing(&trace.x, &y, kmin, half, -1);
    let right = crossing(&trace.x, &y, kmin, half, 1);
    let x_span = (trace.x[n - 1] - trace.x[0]).abs();
    let mut w = (right - left).abs();
    if !(w > 0.0) {
        w = 0.1 * x_span;
    }
    let initial = [y0, depth, trace.x[kmin], w];
    let bounds = Bounds(vec![
        (f64::NEG_INFINITY, f64::INFINITY),
        (f64::NEG_INFINITY, f64::INFINITY),
        (f64::NEG_INFINITY, f64::INFINITY),
        (1e-9 * x_span, f64::INFINITY),
    ]);
    let model = |p: &[f64], xs: &[f64]| Ok(xs.iter().map(|&x| lorentzian_dip(p, x)).collect());
    let mut fit = nlls_minimize(
        model,
        &scaled,
        &["y0", "A", "x0", "w"],
        &initial,
        Some(&bounds),
        &LmOptions::default(),
    )?;
    fit.scale_param(0, span);
    fit.scale_param(1, span);
    fit.params[0] += ymin;
    for v in fit.fitted.iter_mut() {
        *v = ymin + span * *v;
    }
    fit.residual_norm *= span;
    fit.fwhm = Some((fit.params[3], fit.uncertainties[3]));
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(w: f64) -> Trace {
        let x: Vec<f64> = (0..201).map(|k| -60.0 + 0.6 * k as f64).collect();
        let p = [0.8, 0.5, 1.5, w];
        let y = x.iter().map(|&v| lorentzian_dip(&p, v)).collect();
        Trace::new(x, y, None).unwrap()
    }

    #[test]
    fn noiseless_round_trip() {
        let fit = fit_lorentzian_dip(&synthetic(12.1)).unwrap();
        assert!(fit.converged);
        let (w, _) = fit.fwhm.unwrap();
        assert!((w - 12.1).abs() < 0.01, "{w}");
        assert!((fit.param("x0").unwrap() - 1.5).abs() < 1e-6);
        assert!((fit.param("y0").unwrap() - 0.8).abs() < 1e-6);
        assert!((fit.param("A").unwrap() - 0.5).abs() < 1e-6);
        let t = synthetic(12.1);
        assert!(fit.fitted.iter().zip(&t.y).all(|(f, y)| (f - y).abs() < 1e-9));
    }

    #[test]
    fn width_is_invariant_under_affine_rescaling() {
        let t = synthetic(7.3);
        let w0 = fit_lorentzian_dip(&t).unwrap().fwhm.unwrap().0;
        let u = Trace::new(t.x.clone(), t.y.iter().map(|v| 3.7e-6 * v + 42.0).collect(), None).unwrap();
        let w1 = fit_lorentzian_dip(&u).unwrap().fwhm.unwrap().0;
        assert!((w0 - w1).abs() < 1e-8 * w0);
    }

    #[test]
    fn monotone_trace_has_no_dip() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y = x.iter().map(|v| v * 0.1).collect();
        assert_eq!(
            fit_lorentzian_dip(&Trace::new(x, y, None).unwrap()).unwrap_err(),
            Error::NoDip
        );
    }
}

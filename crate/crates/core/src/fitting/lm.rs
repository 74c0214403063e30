use nalgebra::{DMatrix, DVector};

use super::{FitResult, Trace};
use crate::error::{invalid, Error, Result};

/// Damping at which the minimizer gives up on finding a downhill step.
pub const MAX_DAMPING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative step below which the iteration stops.
    pub step_tolerance: f64,
    /// Largest cosine between the residual and any Jacobian column at
    /// which the gradient counts as zero.
    pub gradient_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_tolerance: 1e-10,
            gradient_tolerance: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

/// Box constraints, one `(lower, upper)` pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds(pub Vec<(f64, f64)>);

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Bounds(vec![(f64::NEG_INFINITY, f64::INFINITY); n])
    }

    fn clamp(&self, p: &mut [f64]) {
        for (x, &(lo, hi)) in p.iter_mut().zip(&self.0) {
            *x = x.clamp(lo, hi);
        }
    }
}

/// Forward-difference Jacobian of `model(p, xs)`. Step per parameter is
/// `max(1e-6·|p|, 1e-9)`, taken backwards when the forward point would leave
/// the box.
pub fn jacobian_forward<F>(
    model: &F,
    xs: &[f64],
    p: &[f64],
    f0: &[f64],
    bounds: Option<&Bounds>,
) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(xs.len(), p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let mut h = (1e-6 * p[j].abs()).max(1e-9);
        if let Some(b) = bounds {
            if p[j] + h > b.0[j].1 {
                h = -h;
            }
        }
        q[j] = p[j] + h;
        let f1 = model(&q, xs)?;
        let h = q[j] - p[j];
        for i in 0..xs.len() {
            jac[(i, j)] = (f1[i] - f0[i]) / h;
        }
        q[j] = p[j];
    }
    Ok(jac)
}

fn residuals(trace: &Trace, f: &[f64]) -> DVector<f64> {
    DVector::from_fn(trace.x.len(), |i, _| {
        let r = trace.y[i] - f[i];
        match &trace.sigma {
            Some(s) => r / s[i],
            None => r,
        }
    })
}

fn weighted_jacobian(trace: &Trace, mut jac: DMatrix<f64>) -> DMatrix<f64> {
    if let Some(s) = &trace.sigma {
        for (i, si) in s.iter().enumerate() {
            jac.row_mut(i).scale_mut(1.0 / si);
        }
    }
    jac
}

/// Pseudo-inverse of a symmetric positive-semidefinite matrix.
fn psd_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eig = a.clone().symmetric_eigen();
    let cutoff = 1e-14 * eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let inv = DVector::from_fn(n, |i, _| {
        let v = eig.eigenvalues[i];
        if v > cutoff {
            1.0 / v
        } else {
            0.0
        }
    });
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    (&m + m.transpose()) * 0.5
}

/// Damped Gauss-Newton (Levenberg-Marquardt with Marquardt diagonal
/// scaling) on `model(p, x) ≈ y`.
///
/// Running out of iterations, or a model that does not depend on one of its
/// parameters, yields `converged = false` rather than an error.
pub fn nlls_minimize<F>(
    model: F,
    trace: &Trace,
    names: &[&str],
    initial: &[f64],
    bounds: Option<&Bounds>,
    options: &LmOptions,
) -> Result<FitResult>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    let n = trace.x.len();
    let m = initial.len();
    if names.len() != m {
        return Err(invalid("names", "one name per parameter"));
    }
    if n < m {
        return Err(Error::Underdetermined { points: n, params: m });
    }
    if let Some(b) = bounds {
        if b.0.len() != m {
            return Err(invalid("bounds", "one pair per parameter"));
        }
        for (x, &(lo, hi)) in initial.iter().zip(&b.0) {
            if !(lo <= *x && *x <= hi) {
                return Err(invalid("initial", "initial parameters must lie within bounds"));
            }
        }
    }

    let y_scale = trace
        .y
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut p = initial.to_vec();
    let mut f = model(&p, &trace.x)?;
    let mut r = residuals(trace, &f);
    let mut cost = r.norm_squared();
    let mut damping = options.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = weighted_jacobian(trace, jacobian_forward(&model, &trace.x, &p, &f, bounds)?);
    let mut gradient_norm;

    loop {
        let g = jac.transpose() * &r;
        gradient_norm = g.norm();
        let col_norms: Vec<f64> = (0..m).map(|j| jac.column(j).norm()).collect();
        if col_norms.contains(&0.0) {
            break;
        }
        if cost.sqrt() <= 1e-14 * y_scale * (n as f64).sqrt() {
            converged = true;
            break;
        }
        let rn = r.norm();
        let cosine = (0..m).map(|j| g[j].abs() / (rn * col_norms[j])).fold(0.0, f64::max);
        if cosine <= options.gradient_tolerance {
            converged = true;
            break;
        }
        if iterations >= options.max_iterations {
            break;
        }
        iterations += 1;

        let a = jac.transpose() * &jac;
        let diag = a.diagonal();
        let mut accepted = false;
        loop {
            let mut damped = a.clone();
            for j in 0..m {
                damped[(j, j)] += damping * diag[j];
            }
            let step = damped.cholesky().map(|c| c.solve(&g));
            let Some(step) = step else {
                damping *= 10.0;
                if damping > MAX_DAMPING {
                    return Err(Error::DampingOverflow(MAX_DAMPING));
                }
                continue;
            };
            let mut q: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if let Some(b) = bounds {
                b.clamp(&mut q);
            }
            let moved = p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let size = p.iter().map(|a| a * a).sum::<f64>().sqrt();
            let tiny = moved <= options.step_tolerance * (size + options.step_tolerance);

            let fq = model(&q, &trace.x)?;
            let rq = residuals(trace, &fq);
            let cq = rq.norm_squared();
            if cq.is_finite() && cq < cost {
                p = q;
                f = fq;
                r = rq;
                cost = cq;
                damping = (damping / 10.0).max(1e-15);
                accepted = true;
                if tiny {
                    converged = true;
                }
                break;
            }
            if tiny {
                // no downhill step even at negligible size: at the minimum
                converged = true;
                break;
            }
            damping *= 10.0;
            if damping > MAX_DAMPING {
                return Err(Error::DampingOverflow(MAX_DAMPING));
            }
        }
        if converged {
            if accepted {
                jac = weighted_jacobian(trace, jacobian_forward(&model, &trace.x, &p, &f, bounds)?);
                gradient_norm = (jac.transpose() * &r).norm();
            }
            break;
        }
        jac = weighted_jacobian(trace, jacobian_forward(&model, &trace.x, &p, &f, bounds)?);
    }

    let dof = n.saturating_sub(m);
    let variance = if dof > 0 { cost / dof as f64 } else { 1.0 };
    let covariance = psd_inverse(&(jac.transpose() * &jac)) * variance;
    let uncertainties = (0..m).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect();
    Ok(FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        params: p,
        uncertainties,
        covariance,
        residual_norm: cost.sqrt(),
        gradient_norm,
        converged,
        iterations,
        fwhm: None,
        gamma_g: None,
        t2_star: None,
        r_squared: None,
        fitted: f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(x: Vec<f64>, y: Vec<f64>) -> Trace {
        Trace::new(x, y, None).unwrap()
    }

    fn exp_model(p: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
        Ok(xs.iter().map(|x| p[0] * (-p[1] * x).exp() + p[2]).collect())
    }

    #[test]
    fn exact_data_from_truth_stops_immediately() {
        let xs: Vec<f64> = (0..20).map(|k| k as f64 * 0.3).collect();
        let truth = [2.0, 0.7, 0.1];
        let ys = exp_model(&truth, &xs).unwrap();
        let fit = nlls_minimize(
            exp_model,
            &trace(xs, ys),
            &["a", "k", "c"],
            &truth,
            None,
            &LmOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.iterations <= 2);
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn recovers_exponential_from_offset_start() {
        let xs: Vec<f64> = (0..40).map(|k| k as f64 * 0.2).collect();
        let truth = [2.0, 0.7, 0.1];
        let ys = exp_model(&truth, &xs).unwrap();
        let fit = nlls_minimize(
            exp_model,
            &trace(xs, ys),
            &["a", "k", "c"],
            &[1.0, 1.5, 0.0],
            None,
            &LmOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        for (a, b) in fit.params.iter().zip(truth) {
            assert!((a - b).abs() < 1e-7, "{:?}", fit.params);
        }
    }

    #[test]
    fn linear_model_matches_normal_equations() {
        let xs: Vec<f64> = (0..15).map(|k| k as f64 * 0.5 - 2.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 1.3 * x - 0.4 + 0.05 * ((i * 7 % 5) as f64 - 2.0))
            .collect();
        let linear = |p: &[f64], xs: &[f64]| Ok(xs.iter().map(|x| p[0] * x + p[1]).collect());
        let fit = nlls_minimize(
            linear,
            &trace(xs.clone(), ys.clone()),
            &["a", "b"],
            &[0.0, 0.0],
            None,
            &LmOptions::default(),
        )
        .unwrap();

        let n = xs.len() as f64;
        let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
        let sxx = xs.iter().map(|x| x * x).sum::<f64>();
        let sxy = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>();
        let a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let b = (sy - a * sx) / n;
        assert!(fit.converged);
        assert!((fit.params[0] - a).abs() < 1e-10);
        assert!((fit.params[1] - b).abs() < 1e-10);
    }

    #[test]
    fn flat_model_is_not_converged() {
        let xs: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let flat = |_: &[f64], xs: &[f64]| Ok(vec![0.5; xs.len()]);
        let fit = nlls_minimize(flat, &trace(xs, ys), &["a"], &[1.0], None, &LmOptions::default()).unwrap();
        assert!(!fit.converged);
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let xs: Vec<f64> = (0..40).map(|k| k as f64 * 0.2).collect();
        let ys = exp_model(&[2.0, 0.7, 0.1], &xs).unwrap();
        let opts = LmOptions {
            max_iterations: 1,
            ..LmOptions::default()
        };
        let fit = nlls_minimize(
            exp_model,
            &trace(xs, ys),
            &["a", "k", "c"],
            &[1.0, 1.5, 0.0],
            None,
            &opts,
        )
        .unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn bounds_are_respected() {
        let xs: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -0.5 * x).collect();
        let slope = |p: &[f64], xs: &[f64]| Ok(xs.iter().map(|x| p[0] * x).collect());
        let b = Bounds(vec![(0.0, 10.0)]);
        let fit = nlls_minimize(
            slope,
            &trace(xs.clone(), ys.clone()),
            &["a"],
            &[1.0],
            Some(&b),
            &LmOptions::default(),
        )
        .unwrap();
        assert!(fit.params[0] >= 0.0 && fit.params[0] < 1e-9);
        assert!(nlls_minimize(slope, &trace(xs, ys), &["a"], &[-1.0], Some(&b), &LmOptions::default()).is_err());
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let xs: Vec<f64> = (0..30).map(|k| k as f64 * 0.25).collect();
        let ys: Vec<f64> = exp_model(&[2.0, 0.7, 0.1], &xs)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, y)| y + 0.01 * ((i * 13 % 7) as f64 - 3.0))
            .collect();
        let fit = nlls_minimize(
            exp_model,
            &trace(xs, ys),
            &["a", "k", "c"],
            &[1.0, 1.0, 0.0],
            None,
            &LmOptions::default(),
        )
        .unwrap();
        let c = &fit.covariance;
        assert!((c - c.transpose()).amax() < 1e-9 * c.amax());
        let eig = c.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&v| v >= -1e-9 * c.amax()));
    }

    #[test]
    fn forward_jacobian_matches_central_difference() {
        let xs: Vec<f64> = (0..25).map(|k| k as f64 * 0.3).collect();
        let points = [
            [2.0, 0.7, 0.1],
            [0.5, 0.1, -1.0],
            [3.3, 1.9, 0.0],
            [1.0, 0.05, 2.0],
            [-1.2, 0.4, 0.3],
            [7.0, 0.9, 0.9],
            [0.2, 0.2, 0.2],
            [4.0, 0.01, -3.0],
            [1.5, 1.1, 5.0],
            [0.9, 0.6, -0.7],
        ];
        for p in points {
            let f0 = exp_model(&p, &xs).unwrap();
            let j = jacobian_forward(&exp_model, &xs, &p, &f0, None).unwrap();
            for k in 0..3 {
                let h = 1e-5 * p[k].abs().max(1.0);
                let mut a = p;
                let mut b = p;
                a[k] += h;
                b[k] -= h;
                let fa = exp_model(&a, &xs).unwrap();
                let fb = exp_model(&b, &xs).unwrap();
                for i in 0..xs.len() {
                    let central = (fa[i] - fb[i]) / (2.0 * h);
                    let scale = central.abs().max(1e-3 * j.column(k).amax());
                    assert!((j[(i, k)] - central).abs() <= 1e-5 * scale, "{p:?} {k} {i}");
                }
            }
        }
    }
}

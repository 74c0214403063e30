use super::{nlls_minimize, r_squared, Bounds, FitResult, LmOptions, Trace};
use crate::constants::boltzmann_factor;
use crate::error::{Error, Result};
use crate::model::LevelDiagram;
use crate::transitions::driven_partner;

/// Which ground pair is driven at a given field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairSchedule {
    /// Always the same sorted levels (1-based).
    Fixed(usize, usize),
    /// (1,2) below the crossing field, (1,3) above.
    Crossing { b_star: f64 },
}

impl PairSchedule {
    pub fn pair(&self, b: f64) -> (usize, usize) {
        match *self {
            PairSchedule::Fixed(i, j) => (i, j),
            PairSchedule::Crossing { b_star } => (1, driven_partner(b, b_star)),
        }
    }
}

/// Fits `w0` and `A` (MHz, both ≥ 0) of the overlap × Boltzmann model at
/// `temperature` to widths over field. Every field must be a grid point of
/// `levels`.
pub fn fit_width_model(
    widths: &Trace,
    levels: &LevelDiagram,
    schedule: PairSchedule,
    temperature: f64,
) -> Result<FitResult> {
    if widths.len() < 3 {
        return Err(Error::Underdetermined {
            points: widths.len(),
            params: 2,
        });
    }
    let mut shape = Vec::with_capacity(widths.len());
    for &b in &widths.x {
        let k = levels.index_of(b)?;
        let (i, j) = schedule.pair(b);
        let sys = &levels.systems[k];
        shape.push(sys.overlap(i - 1, j - 1) * boltzmann_factor(sys.gap(i - 1, j - 1), temperature));
    }
    let lookup = |x: f64| -> f64 {
        let k = widths
            .x
            .iter()
            .position(|&v| v == x)
            .expect("model evaluated off the data grid");
        shape[k]
    };
    let model = |p: &[f64], xs: &[f64]| Ok(xs.iter().map(|&x| p[0] + p[1] * lookup(x)).collect());

    let ymin = widths.y.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let ymax = widths.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let smax = shape.iter().copied().fold(0.0, f64::max);
    let a0 = if smax > 0.0 {
        ((ymax - ymin) / smax).max(0.0)
    } else {
        0.0
    };
    let bounds = Bounds(vec![(0.0, f64::INFINITY), (0.0, f64::INFINITY)]);
    let mut fit = nlls_minimize(
        model,
        widths,
        &["w0", "A"],
        &[ymin, a0],
        Some(&bounds),
        &LmOptions::default(),
    )?;
    let predicted: Vec<f64> = shape.iter().map(|s| fit.params[0] + fit.params[1] * s).collect();
    fit.r_squared = Some(r_squared(&widths.y, &predicted));
    Ok(fit)
}

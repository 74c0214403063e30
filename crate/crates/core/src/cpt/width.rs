use serde::{Deserialize, Serialize};

use crate::constants::boltzmann_factor;
use crate::error::{invalid, Result};
use crate::model::LevelDiagram;

/// Overlap × Boltzmann dip-width model `w0 + A·O·exp(−hΔν/k_BT)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthModelParams {
    /// MHz.
    pub w0: f64,
    /// MHz.
    pub amplitude: f64,
    /// Kelvin.
    pub temperature: f64,
}

impl WidthModelParams {
    pub fn evaluate(&self, overlap: f64, splitting_ghz: f64) -> f64 {
        self.w0 + self.amplitude * overlap * boltzmann_factor(splitting_ghz.abs(), self.temperature)
    }
}

/// Model width at grid field `b` for the sorted level pair `pair` (1-based).
pub fn overlap_boltzmann_model(
    b: f64,
    levels: &LevelDiagram,
    model: &WidthModelParams,
    pair: (usize, usize),
) -> Result<f64> {
    let (i, j) = pair;
    if !(1..=4).contains(&i) || !(1..=4).contains(&j) {
        return Err(invalid("pair", "levels must be in 1..=4"));
    }
    let k = levels.index_of(b)?;
    let sys = &levels.systems[k];
    Ok(model.evaluate(sys.overlap(i - 1, j - 1), sys.gap(i - 1, j - 1)))
}

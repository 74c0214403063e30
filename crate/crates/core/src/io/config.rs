use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cpt::{linspace, LambdaSetup, LaserConfig, RateSet};
use crate::error::{invalid, Error, Result};
use crate::model::{GeometryConfig, ManifoldParams};
use crate::transitions::{DipoleModel, DEFAULT_LINE_FWHM_GHZ, DEFAULT_MIN_INTENSITY};

/// Evenly spaced grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridSpec {
    pub const fn new(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points }
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points)
    }

    fn validate(&self, key: &str) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(invalid(key, "start and stop must be finite"));
        }
        if self.points == 0 {
            return Err(invalid(&format!("{key}.points"), "must be >= 1"));
        }
        if self.points > 1 && self.start == self.stop {
            return Err(invalid(key, "start == stop with more than one point"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    /// Tesla.
    pub field: GridSpec,
    /// MHz, laser-2 detuning (and laser-1 in 2D scans).
    pub detuning: GridSpec,
    /// GHz from the zero-field zero-phonon line.
    pub frequency: GridSpec,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            field: GridSpec::new(0.5, 6.0, 56),
            detuning: GridSpec::new(-50.0, 50.0, 201),
            frequency: GridSpec::new(-400.0, 400.0, 1601),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Relative standard deviation of the multiplicative noise.
    pub sigma_rel: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            sigma_rel: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionsConfig {
    pub dipole_model: DipoleModel,
    /// Lines weaker than this (relative) do not count as Λ arms.
    pub min_intensity: f64,
    /// Lorentzian FWHM of rendered spectrum lines, GHz.
    pub line_fwhm: f64,
}

impl Default for TransitionsConfig {
    fn default() -> Self {
        Self {
            dipole_model: DipoleModel::default(),
            min_intensity: DEFAULT_MIN_INTENSITY,
            line_fwhm: DEFAULT_LINE_FWHM_GHZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Where the (2,3) ground crossing should sit, T.
    pub crossing_target: f64,
    /// Search range for the crossing, T.
    pub crossing_range: [f64; 2],
    /// Dip FWHM the laser dephasing is tuned to, MHz.
    pub dip_width: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            crossing_target: crate::constants::CROSSING_TARGET_T,
            crossing_range: [1.0, 6.0],
            dip_width: 12.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WidthSweepConfig {
    /// Power ratios P/P_sat of both lasers during the sweep.
    pub powers: [f64; 2],
}

impl Default for WidthSweepConfig {
    fn default() -> Self {
        Self { powers: [4.0, 4.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory for outputs written without an explicit `--out`.
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Everything a run needs. Every key is optional in JSON; absent keys take
/// the defaults below and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub ground: ManifoldParams,
    pub excited: ManifoldParams,
    pub geometry: GeometryConfig,
    pub rates: RateSet,
    pub lasers: [LaserConfig; 2],
    /// Operating field for single-field commands, T.
    pub field: f64,
    pub grids: Grids,
    pub transitions: TransitionsConfig,
    pub calibration: CalibrationConfig,
    pub width_sweep: WidthSweepConfig,
    pub noise: NoiseConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ground: ManifoldParams::ground(),
            excited: ManifoldParams::excited(),
            geometry: GeometryConfig::default(),
            rates: RateSet::default(),
            lasers: [LaserConfig::with_power(1.0), LaserConfig::with_power(0.5)],
            field: 0.7,
            grids: Grids::default(),
            transitions: TransitionsConfig::default(),
            calibration: CalibrationConfig::default(),
            width_sweep: WidthSweepConfig::default(),
            noise: NoiseConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.ground.validate("ground")?;
        self.excited.validate("excited")?;
        self.geometry.validate()?;
        self.rates.validate("rates")?;
        for (i, l) in self.lasers.iter().enumerate() {
            l.validate(&format!("lasers[{i}]"))?;
        }
        if !(self.field.is_finite() && self.field >= 0.0) {
            return Err(invalid("field", "must be finite and >= 0"));
        }
        self.grids.field.validate("grids.field")?;
        if self.grids.field.start < 0.0 || self.grids.field.stop < 0.0 {
            return Err(invalid("grids.field", "fields must be >= 0"));
        }
        self.grids.detuning.validate("grids.detuning")?;
        self.grids.frequency.validate("grids.frequency")?;
        let t = &self.transitions;
        if !(t.min_intensity.is_finite() && t.min_intensity >= 0.0) {
            return Err(invalid("transitions.min_intensity", "must be finite and >= 0"));
        }
        if !(t.line_fwhm.is_finite() && t.line_fwhm > 0.0) {
            return Err(invalid("transitions.line_fwhm", "must be > 0"));
        }
        let c = &self.calibration;
        if !(c.crossing_target.is_finite() && c.crossing_target > 0.0) {
            return Err(invalid("calibration.crossing_target", "must be > 0"));
        }
        let [lo, hi] = c.crossing_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
            return Err(invalid("calibration.crossing_range", "need 0 <= lo < hi"));
        }
        if !(c.dip_width.is_finite() && c.dip_width > 0.0) {
            return Err(invalid("calibration.dip_width", "must be > 0"));
        }
        for (i, p) in self.width_sweep.powers.iter().enumerate() {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(invalid(&format!("width_sweep.powers[{i}]"), "must be finite and >= 0"));
            }
        }
        if !(self.noise.sigma_rel.is_finite() && self.noise.sigma_rel >= 0.0) {
            return Err(invalid("noise.sigma_rel", "must be finite and >= 0"));
        }
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }

    /// Λ-system factory for this configuration.
    pub fn lambda_setup(&self) -> Result<LambdaSetup> {
        let mut setup = LambdaSetup::new(self.ground, self.excited, self.geometry, self.rates, self.lasers)?;
        setup.dipole = self.transitions.dipole_model;
        setup.min_intensity = self.transitions.min_intensity;
        Ok(setup)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config always serializes");
        s.push('\n');
        s
    }
}

/// Parses and validates a configuration held in memory. `origin` names the
/// source in error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config(
            r#"{"geometry": {"field_angle_deg": 0.0}, "grids": {"field": {"start": 0, "stop": 2, "points": 3}}}"#,
            "mem",
        )
        .unwrap();
        assert_eq!(cfg.geometry.field_angle_deg, 0.0);
        assert_eq!(cfg.geometry.field_azimuth_deg, 0.0);
        assert_eq!(cfg.grids.field.values(), vec![0.0, 1.0, 2.0]);
        assert_eq!(cfg.rates, RateSet::default());
        assert_eq!(cfg.grids.detuning, Grids::default().detuning);
    }

    #[test]
    fn negative_rate_names_the_key() {
        let err = parse_config(r#"{"rates": {"gamma_g": -1.0}}"#, "mem").unwrap_err();
        match err {
            Error::InvalidParameter { name, .. } => assert_eq!(name, "rates.gamma_g"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = parse_config("{\n  \"rates\": {\"gamma_gg\": 1.0}\n}", "c.json").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("gamma_gg"));
            }
            e => panic!("{e:?}"),
        }
        assert!(parse_config(r#"{"colour": 1}"#, "mem").is_err());
    }

    #[test]
    fn serialization_is_a_fixpoint() {
        let mut cfg = RunConfig::default();
        cfg.noise.seed = u64::MAX;
        cfg.rates.gamma_g = 0.1 + 0.2;
        let once = cfg.to_json();
        let back = parse_config(&once, "mem").unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), once);
    }

    #[test]
    fn grid_validation() {
        let mut cfg = RunConfig::default();
        cfg.grids.detuning.points = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.grids.field = GridSpec::new(-1.0, 1.0, 5);
        assert!(cfg.validate().is_err());
        assert_eq!(GridSpec::new(2.0, 9.0, 1).values(), vec![2.0]);
    }
}

use serde::{Deserialize, Serialize};

use crate::constants::TETRAHEDRAL_ANGLE_DEG;
use crate::error::{invalid, Result};

/// Spin-orbit, strain and Zeeman parameters of one manifold.
///
/// Energies in GHz, gyromagnetic ratios in GHz/T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldParams {
    pub lambda_so: f64,
    pub strain_alpha: f64,
    pub strain_beta: f64,
    pub quench_f: f64,
    pub gamma_l: f64,
    pub gamma_s: f64,
}

impl ManifoldParams {
    /// Ground manifold before the crossing calibration.
    pub fn ground() -> Self {
        Self {
            lambda_so: 48.0,
            strain_alpha: 0.0,
            strain_beta: 0.0,
            quench_f: 0.1,
            gamma_l: 14.0,
            gamma_s: 28.0,
        }
    }

    pub fn excited() -> Self {
        Self {
            lambda_so: 255.0,
            ..Self::ground()
        }
    }

    pub fn with_lambda(self, lambda_so: f64) -> Self {
        Self { lambda_so, ..self }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}.{k}");
        let finite = [
            ("lambda_so", self.lambda_so),
            ("strain_alpha", self.strain_alpha),
            ("strain_beta", self.strain_beta),
            ("quench_f", self.quench_f),
            ("gamma_l", self.gamma_l),
            ("gamma_s", self.gamma_s),
        ];
        for (k, v) in finite {
            if !v.is_finite() {
                return Err(invalid(&key(k), "must be finite"));
            }
        }
        if self.lambda_so <= 0.0 {
            return Err(invalid(&key("lambda_so"), "must be > 0"));
        }
        if self.gamma_s <= 0.0 {
            return Err(invalid(&key("gamma_s"), "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.quench_f) {
            return Err(invalid(&key("quench_f"), "must lie in [0, 1]"));
        }
        Ok(())
    }
}

impl Default for ManifoldParams {
    fn default() -> Self {
        Self::ground()
    }
}

/// Orientation of the applied field relative to the center axis (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub field_angle_deg: f64,
    pub field_azimuth_deg: f64,
}

impl GeometryConfig {
    pub fn aligned() -> Self {
        Self {
            field_angle_deg: 0.0,
            field_azimuth_deg: 0.0,
        }
    }

    /// Field along a second <111> axis, arccos(-1/3) from the center axis.
    pub fn tetrahedral() -> Self {
        Self {
            field_angle_deg: TETRAHEDRAL_ANGLE_DEG,
            field_azimuth_deg: 0.0,
        }
    }

    pub fn with_angle(self, field_angle_deg: f64) -> Self {
        Self {
            field_angle_deg,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=180.0).contains(&self.field_angle_deg) {
            return Err(invalid("geometry.field_angle_deg", "must lie in [0, 180]"));
        }
        if !self.field_azimuth_deg.is_finite() {
            return Err(invalid("geometry.field_azimuth_deg", "must be finite"));
        }
        Ok(())
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self::tetrahedral()
    }
}

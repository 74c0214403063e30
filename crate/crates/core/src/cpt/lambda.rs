use serde::{Deserialize, Serialize};

use crate::constants::{boltzmann_factor, LASER_DEPHASING_CALIBRATED};
use crate::error::{invalid, Result};
use crate::model::{
    find_avoided_crossing, manifold_eigensystem, to_center_frame, EigenSystem, GeometryConfig, ManifoldParams,
};
use crate::transitions::{
    driven_partner, identify_d_transitions, transition_table_with, DipoleModel, TransitionTable, DEFAULT_MIN_INTENSITY,
};

/// One drive laser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaserConfig {
    /// Detuning from its transition, MHz.
    pub detuning: f64,
    /// P / P_sat.
    pub power_ratio: f64,
    /// Linewidth, MHz; adds to the mutual ground-coherence dephasing.
    pub linewidth: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self {
            detuning: 0.0,
            power_ratio: 1.0,
            linewidth: 0.0,
        }
    }
}

impl LaserConfig {
    pub fn with_power(power_ratio: f64) -> Self {
        Self {
            power_ratio,
            ..Self::default()
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !self.detuning.is_finite() {
            return Err(invalid(&format!("{prefix}.detuning"), "must be finite"));
        }
        if !(self.power_ratio.is_finite() && self.power_ratio >= 0.0) {
            return Err(invalid(&format!("{prefix}.power_ratio"), "must be >= 0"));
        }
        if !(self.linewidth.is_finite() && self.linewidth >= 0.0) {
            return Err(invalid(&format!("{prefix}.linewidth"), "must be >= 0"));
        }
        Ok(())
    }
}

/// How phonons act between the two driven ground states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhononChannel {
    /// Pure dephasing of the ground coherence at the thermally activated
    /// rate `γ_ph·O²·exp(−hΔ/k_BT)`.
    #[default]
    ActivatedDephasing,
    /// Population exchange: `γ↓ = γ_ph·O²` into |1⟩, `γ↑ = γ↓·exp(−hΔ/k_BT)` out.
    Transfer,
}

/// Dissipation rates, all ordinary frequencies in s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateSet {
    pub gamma_total: f64,
    pub branching: [f64; 2],
    pub gamma_e_dephase: f64,
    pub gamma_g: f64,
    pub gamma_laser_rel: f64,
    pub gamma_ph: f64,
    /// Kelvin.
    pub temperature: f64,
    pub phonon_channel: PhononChannel,
}

impl Default for RateSet {
    fn default() -> Self {
        Self {
            gamma_total: 5.9e8,
            branching: [0.5, 0.5],
            gamma_e_dephase: 5.0e10,
            gamma_g: 4.0e6,
            gamma_laser_rel: LASER_DEPHASING_CALIBRATED,
            gamma_ph: 2.5e8,
            temperature: 4.0,
            phonon_channel: PhononChannel::default(),
        }
    }
}

impl RateSet {
    /// Only spontaneous decay; every dephasing and phonon rate zero.
    pub fn radiative_only(gamma_total: f64) -> Self {
        Self {
            gamma_total,
            gamma_e_dephase: 0.0,
            gamma_g: 0.0,
            gamma_laser_rel: 0.0,
            gamma_ph: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let named = [
            ("gamma_total", self.gamma_total),
            ("gamma_e_dephase", self.gamma_e_dephase),
            ("gamma_g", self.gamma_g),
            ("gamma_laser_rel", self.gamma_laser_rel),
            ("gamma_ph", self.gamma_ph),
            ("temperature", self.temperature),
        ];
        for (name, v) in named {
            // an infinite temperature is allowed: it switches off the Boltzmann suppression
            if v.is_nan() || v < 0.0 || (v.is_infinite() && name != "temperature") {
                return Err(invalid(&format!("{prefix}.{name}"), "must be finite and >= 0"));
            }
        }
        let [b1, b2] = self.branching;
        if !(b1 >= 0.0 && b2 >= 0.0 && (b1 + b2 - 1.0).abs() <= 1e-12) {
            return Err(invalid(
                &format!("{prefix}.branching"),
                "must be nonnegative and sum to 1",
            ));
        }
        Ok(())
    }
}

/// Driven three-level system |1⟩, |g₂⟩, |e⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSystem {
    /// E(g₂) − E(1), MHz.
    pub delta_split: f64,
    /// Ω₁, Ω₂ in MHz.
    pub rabi: [f64; 2],
    pub lasers: [LaserConfig; 2],
    pub rates: RateSet,
    pub relative_dipoles: [f64; 2],
    /// Spin overlap of |1⟩ and |g₂⟩.
    pub ground_overlap: f64,
    /// Ground level index (1-based) playing |g₂⟩.
    pub partner: usize,
    /// Applied field magnitude, T.
    pub field: f64,
}

impl LambdaSystem {
    /// A bare Λ system with given Rabi frequencies and no ground splitting,
    /// mostly for tests and analytic checks.
    pub fn bare(rabi: [f64; 2], detunings: [f64; 2], rates: RateSet) -> Self {
        Self {
            delta_split: 0.0,
            rabi,
            lasers: [
                LaserConfig {
                    detuning: detunings[0],
                    ..LaserConfig::default()
                },
                LaserConfig {
                    detuning: detunings[1],
                    ..LaserConfig::default()
                },
            ],
            rates,
            relative_dipoles: [1.0, 1.0],
            ground_overlap: 0.0,
            partner: 2,
            field: 0.0,
        }
    }

    pub fn with_detunings(mut self, delta1: f64, delta2: f64) -> Self {
        self.lasers[0].detuning = delta1;
        self.lasers[1].detuning = delta2;
        self
    }

    pub fn with_gamma_g(mut self, gamma_g: f64) -> Self {
        self.rates.gamma_g = gamma_g;
        self
    }

    /// Rescales both Rabi frequencies to new power ratios.
    pub fn with_powers(mut self, powers: [f64; 2]) -> Self {
        let sat = saturation_rabi(self.rates.gamma_total);
        for (i, p) in powers.into_iter().enumerate() {
            self.lasers[i].power_ratio = p;
            self.rabi[i] = sat * self.relative_dipoles[i] * p.sqrt();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate("rates")?;
        self.lasers[0].validate("lasers[0]")?;
        self.lasers[1].validate("lasers[1]")?;
        for (i, r) in self.rabi.iter().enumerate() {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(invalid(&format!("rabi[{i}]"), "must be finite and >= 0"));
            }
        }
        if !self.delta_split.is_finite() {
            return Err(invalid("delta_split", "must be finite"));
        }
        Ok(())
    }

    /// Phonon rates between the ground states in µs⁻¹:
    /// `(dephasing, down into |1⟩, up out of |1⟩)`.
    pub fn phonon_rates(&self) -> (f64, f64, f64) {
        let gph = self.rates.gamma_ph * 1e-6;
        let o = self.ground_overlap;
        let bf = boltzmann_factor(self.delta_split.abs() * 1e-3, self.rates.temperature);
        match self.rates.phonon_channel {
            PhononChannel::ActivatedDephasing => (gph * o * o * bf, 0.0, 0.0),
            PhononChannel::Transfer => {
                let down = gph * o * o;
                (0.0, down, down * bf)
            }
        }
    }

    /// Total decay rate of the |1⟩–|g₂⟩ coherence from ground decoherence and
    /// laser mutual coherence, µs⁻¹.
    pub fn ground_dephasing(&self) -> f64 {
        (self.rates.gamma_g + self.rates.gamma_laser_rel) * 1e-6 + self.lasers[0].linewidth + self.lasers[1].linewidth
    }
}

/// Ω_sat = Γ/√2 in MHz for Γ in s⁻¹.
pub fn saturation_rabi(gamma_total: f64) -> f64 {
    gamma_total * 1e-6 / std::f64::consts::SQRT_2
}

/// Builds the driven Λ system from the two manifolds at field `b`.
/// |g₂⟩ is |2⟩ below `b_star` and |3⟩ above.
pub fn reduce_to_lambda(
    ground: &EigenSystem,
    table: &TransitionTable,
    lasers: [LaserConfig; 2],
    rates: RateSet,
    b: f64,
    b_star: f64,
    min_intensity: f64,
) -> Result<LambdaSystem> {
    let partner = driven_partner(b, b_star);
    let d = identify_d_transitions(table, partner, min_intensity)?;
    let dipoles = [d.d1.intensity.sqrt(), d.d2.intensity.sqrt()];
    let sat = saturation_rabi(rates.gamma_total);
    let rabi = [
        sat * dipoles[0] * lasers[0].power_ratio.sqrt(),
        sat * dipoles[1] * lasers[1].power_ratio.sqrt(),
    ];
    Ok(LambdaSystem {
        delta_split: (ground.energies[partner - 1] - ground.energies[0]) * 1e3,
        rabi,
        lasers,
        rates,
        relative_dipoles: dipoles,
        ground_overlap: ground.overlap(0, partner - 1),
        partner,
        field: b,
    })
}

/// Everything needed to produce a Λ system at an arbitrary field.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSetup {
    pub ground: ManifoldParams,
    pub excited: ManifoldParams,
    pub geometry: GeometryConfig,
    pub rates: RateSet,
    pub lasers: [LaserConfig; 2],
    /// Field of the ground (2,3) avoided crossing, T.
    pub b_star: f64,
    pub dipole: DipoleModel,
    pub min_intensity: f64,
}

impl LambdaSetup {
    /// Locates the crossing itself; falls back to an infinite crossing field
    /// (partner always |2⟩) when none is found up to 20 T.
    pub fn new(
        ground: ManifoldParams,
        excited: ManifoldParams,
        geometry: GeometryConfig,
        rates: RateSet,
        lasers: [LaserConfig; 2],
    ) -> Result<Self> {
        ground.validate("ground")?;
        excited.validate("excited")?;
        geometry.validate()?;
        rates.validate("rates")?;
        let b_star = find_avoided_crossing(&ground, &geometry, (2, 3), (0.05, 20.0))
            .map(|c| c.field)
            .unwrap_or(f64::INFINITY);
        Ok(Self {
            ground,
            excited,
            geometry,
            rates,
            lasers,
            b_star,
            dipole: DipoleModel::default(),
            min_intensity: DEFAULT_MIN_INTENSITY,
        })
    }

    pub fn lambda_at(&self, b: f64) -> Result<LambdaSystem> {
        let field = to_center_frame(b, &self.geometry);
        let g = manifold_eigensystem(&self.ground, &field)?;
        let e = manifold_eigensystem(&self.excited, &field)?;
        let table = transition_table_with(&g, &e, self.dipole)?;
        reduce_to_lambda(&g, &table, self.lasers, self.rates, b, self.b_star, self.min_intensity)
    }
}

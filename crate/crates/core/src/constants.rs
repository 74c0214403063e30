//! Physical constants and frozen defaults.

/// Planck constant over Boltzmann constant, K per GHz.
pub const H_OVER_KB_K_PER_GHZ: f64 = 6.626_070_15e-34 * 1e9 / 1.380_649e-23;

/// arccos(-1/3) in degrees: the angle between two distinct <111> bond axes.
pub const TETRAHEDRAL_ANGLE_DEG: f64 = 109.471_220_634_490_69;

/// Field at which the ground-state avoided crossing is pinned (T).
pub const CROSSING_TARGET_T: f64 = 3.5;

/// Ground spin-orbit constant after pinning the crossing to [`CROSSING_TARGET_T`]
/// at the tetrahedral angle with the default Zeeman parameters (GHz).
pub const LAMBDA_GROUND_CALIBRATED_GHZ: f64 = 294.0;

/// Mutual laser dephasing rate that reproduces a 12.1 MHz dip at 0.7 T with
/// the default rates and powers (1, 0.5) (s⁻¹). Frozen output of
/// `calibrate_laser_dephasing` (2.7599e5), rounded.
pub const LASER_DEPHASING_CALIBRATED: f64 = 2.76e5;

/// Boltzmann factor exp(-h·Δν / k_B·T) for a splitting in GHz.
///
/// Infinite temperature gives 1; zero temperature gives 0 for Δν > 0.
pub fn boltzmann_factor(splitting_ghz: f64, temperature_k: f64) -> f64 {
    if temperature_k.is_infinite() {
        return 1.0;
    }
    if temperature_k <= 0.0 {
        return if splitting_ghz > 0.0 { 0.0 } else { 1.0 };
    }
    (-H_OVER_KB_K_PER_GHZ * splitting_ghz / temperature_k).exp()
}

//! Ground↔excited optical transitions, Λ-pair selection and synthetic
//! field-dependent spectra.

use nalgebra::Vector4;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{manifold_eigensystem, spin_overlap, to_center_frame, EigenSystem};
use crate::model::{GeometryConfig, ManifoldParams};

/// Relative intensity below which a D1/D2 arm is treated as dark.
pub const DEFAULT_MIN_INTENSITY: f64 = 1e-6;

/// Default display linewidth for spectrum maps (GHz).
pub const DEFAULT_LINE_FWHM_GHZ: f64 = 1.0;

/// Dipole operator used for line strengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipoleModel {
    /// Spin-conserving dipole averaged over the orbital part:
    /// `½ Σ_{o,o'} |Σ_s ⟨e; o',s|g; o,s⟩|²`. Only the reduced spin states matter.
    #[default]
    OrbitalAveraged,
    /// Pure state overlap `|⟨e|g⟩|²`.
    Identity,
}

impl DipoleModel {
    /// Unnormalized line strength between excited state `e` and ground state `g`.
    pub fn strength(self, e: &Vector4<Complex64>, g: &Vector4<Complex64>) -> f64 {
        match self {
            DipoleModel::Identity => e.dotc(g).norm_sqr(),
            DipoleModel::OrbitalAveraged => {
                let mut sum = 0.0;
                for oe in 0..2 {
                    for og in 0..2 {
                        let m: Complex64 = (0..2).map(|s| e[2 * oe + s].conj() * g[2 * og + s]).sum();
                        sum += m.norm_sqr();
                    }
                }
                0.5 * sum
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinCharacter {
    Conserving,
    Flipping,
}

/// One optical line. Level indices are 1-based in energy order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub excited: usize,
    pub ground: usize,
    /// Offset from the zero-field line center, GHz.
    pub frequency: f64,
    /// Relative to the brightest line of the table.
    pub intensity: f64,
    pub raw_intensity: f64,
    pub spin_character: SpinCharacter,
}

/// All 16 lines, excited-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub entries: Vec<Transition>,
    pub dipole: DipoleModel,
}

impl TransitionTable {
    pub fn get(&self, excited: usize, ground: usize) -> &Transition {
        &self.entries[(excited - 1) * 4 + (ground - 1)]
    }

    pub fn flipping(&self) -> impl Iterator<Item = &Transition> {
        self.entries
            .iter()
            .filter(|t| t.spin_character == SpinCharacter::Flipping)
    }

    pub fn conserving(&self) -> impl Iterator<Item = &Transition> {
        self.entries
            .iter()
            .filter(|t| t.spin_character == SpinCharacter::Conserving)
    }
}

fn same_field(a: &EigenSystem, b: &EigenSystem) -> bool {
    match (a.field, b.field) {
        (Some(x), Some(y)) => (x - y).amax() <= 1e-12 * x.amax().max(1.0),
        _ => true,
    }
}

/// Transition table with the default dipole model.
pub fn transition_table(ground: &EigenSystem, excited: &EigenSystem) -> Result<TransitionTable> {
    transition_table_with(ground, excited, DipoleModel::default())
}

pub fn transition_table_with(
    ground: &EigenSystem,
    excited: &EigenSystem,
    dipole: DipoleModel,
) -> Result<TransitionTable> {
    if !same_field(ground, excited) {
        return Err(Error::ConfigurationMismatch);
    }
    let mut entries = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let e = &excited.states[i];
            let g = &ground.states[j];
            let spin_character = if spin_overlap(e, g) > 0.5 {
                SpinCharacter::Conserving
            } else {
                SpinCharacter::Flipping
            };
            entries.push(Transition {
                excited: i + 1,
                ground: j + 1,
                frequency: excited.energies[i] - ground.energies[j],
                intensity: 0.0,
                raw_intensity: dipole.strength(e, g),
                spin_character,
            });
        }
    }
    let max = entries.iter().map(|t| t.raw_intensity).fold(0.0, f64::max);
    if max > 0.0 {
        for t in &mut entries {
            t.intensity = t.raw_intensity / max;
        }
    }
    Ok(TransitionTable { entries, dipole })
}

/// Ground partner of |1⟩ in the driven Λ: |2⟩ below the crossing, |3⟩ at or above.
pub fn driven_partner(b: f64, b_star: f64) -> usize {
    if b < b_star {
        2
    } else {
        3
    }
}

/// The two driven lines of the Λ system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DTransitions {
    pub d1: Transition,
    pub d2: Transition,
}

/// D1 is |1⟩ → highest excited state; D2 is `partner` → the same excited
/// state. Fails when either arm is weaker than `min_intensity`.
pub fn identify_d_transitions(table: &TransitionTable, partner: usize, min_intensity: f64) -> Result<DTransitions> {
    if partner != 2 && partner != 3 {
        return Err(invalid("partner", "must be ground level 2 or 3"));
    }
    let d1 = *table.get(4, 1);
    let d2 = *table.get(4, partner);
    for (name, t) in [("D1", &d1), ("D2", &d2)] {
        if !(t.intensity >= min_intensity) {
            return Err(Error::NoLambda(format!(
                "{name} ({}→{}) relative intensity {:e} is below {:e}",
                t.ground, t.excited, t.intensity, min_intensity
            )));
        }
    }
    Ok(DTransitions { d1, d2 })
}

/// Field-dependent fluorescence map: one row per field value.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMap {
    pub field_values: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// `intensity[k][n]` at field `k` and frequency `n`.
    pub intensity: Vec<Vec<f64>>,
    pub line_fwhm: f64,
}

/// Sum of peak-normalized Lorentzians, one per table entry.
pub fn render_lines(table: &TransitionTable, frequencies: &[f64], fwhm: f64) -> Vec<f64> {
    let hw2 = (0.5 * fwhm).powi(2);
    frequencies
        .iter()
        .map(|&f| {
            table
                .entries
                .iter()
                .map(|t| t.intensity * hw2 / ((f - t.frequency).powi(2) + hw2))
                .sum()
        })
        .collect()
}

pub fn synthesize_spectrum_map(
    ground: &ManifoldParams,
    excited: &ManifoldParams,
    geometry: &GeometryConfig,
    field_grid: &[f64],
    frequencies: &[f64],
    line_fwhm: f64,
    dipole: DipoleModel,
) -> Result<SpectrumMap> {
    if field_grid.is_empty() {
        return Err(invalid("grids.field", "must not be empty"));
    }
    if frequencies.is_empty() {
        return Err(invalid("grids.frequency", "must not be empty"));
    }
    if !(line_fwhm.is_finite() && line_fwhm > 0.0) {
        return Err(invalid("line_fwhm", "must be > 0"));
    }
    ground.validate("ground")?;
    excited.validate("excited")?;
    geometry.validate()?;
    let intensity = field_grid
        .par_iter()
        .map(|&b| {
            let field = to_center_frame(b, geometry);
            let g = manifold_eigensystem(ground, &field)?;
            let e = manifold_eigensystem(excited, &field)?;
            let table = transition_table_with(&g, &e, dipole)?;
            Ok(render_lines(&table, frequencies, line_fwhm))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumMap {
        field_values: field_grid.to_vec(),
        frequencies: frequencies.to_vec(),
        intensity,
        line_fwhm,
    })
}

/// Transition table for given parameters at a single field magnitude.
pub fn table_at(
    ground: &ManifoldParams,
    excited: &ManifoldParams,
    geometry: &GeometryConfig,
    b: f64,
) -> Result<(EigenSystem, EigenSystem, TransitionTable)> {
    table_at_with(ground, excited, geometry, b, DipoleModel::default())
}

pub fn table_at_with(
    ground: &ManifoldParams,
    excited: &ManifoldParams,
    geometry: &GeometryConfig,
    b: f64,
    dipole: DipoleModel,
) -> Result<(EigenSystem, EigenSystem, TransitionTable)> {
    let field = to_center_frame(b, geometry);
    let g = manifold_eigensystem(ground, &field)?;
    let e = manifold_eigensystem(excited, &field)?;
    let table = transition_table_with(&g, &e, dipole)?;
    Ok((g, e, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::LAMBDA_GROUND_CALIBRATED_GHZ;
    use nalgebra::Matrix2;

    fn ground() -> ManifoldParams {
        ManifoldParams::ground().with_lambda(LAMBDA_GROUND_CALIBRATED_GHZ)
    }

    fn at(b: f64, g: &GeometryConfig) -> TransitionTable {
        table_at(&ground(), &ManifoldParams::excited(), g, b).unwrap().2
    }

    /// Orbital average written as a sum over an orthonormal operator basis
    /// {1, σx, σy, σz}/√2 acting on the orbital factor.
    fn averaged_oracle(e: &Vector4<Complex64>, g: &Vector4<Complex64>) -> f64 {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let ops = [
            Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)),
            Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
            Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
            Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
        ];
        let id2 = Matrix2::<Complex64>::identity();
        ops.iter()
            .map(|o| {
                let p = (o * c(std::f64::consts::FRAC_1_SQRT_2, 0.0)).kronecker(&id2);
                e.dotc(&(p * g)).norm_sqr()
            })
            .sum::<f64>()
            * 0.5
    }

    #[test]
    fn averaged_strength_matches_operator_basis_sum() {
        let (g, e, _) = table_at(
            &ground(),
            &ManifoldParams::excited(),
            &GeometryConfig::tetrahedral(),
            2.3,
        )
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let a = DipoleModel::OrbitalAveraged.strength(&e.states[i], &g.states[j]);
                let b = averaged_oracle(&e.states[i], &g.states[j]);
                assert!((a - b).abs() < 1e-12, "{i}{j}: {a} {b}");
            }
        }
    }

    #[test]
    fn aligned_field_has_eight_conserving_lines() {
        let t = at(2.0, &GeometryConfig::aligned());
        let bright: Vec<_> = t.entries.iter().filter(|x| x.intensity > 1e-3).collect();
        assert_eq!(bright.len(), 8);
        assert!(bright.iter().all(|x| x.spin_character == SpinCharacter::Conserving));
        let flip: f64 = t.flipping().map(|x| x.raw_intensity).sum();
        let keep: f64 = t.conserving().map(|x| x.raw_intensity).sum();
        assert!(flip < 1e-3 * keep);
    }

    #[test]
    fn tilted_field_adds_spin_flip_lines() {
        let t = at(5.0, &GeometryConfig::tetrahedral());
        assert!(t.flipping().filter(|x| x.intensity > 0.01).count() >= 4);
        let max = t.entries.iter().map(|x| x.intensity).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_field_has_four_lines() {
        let t = at(0.0, &GeometryConfig::tetrahedral());
        let mut freqs: Vec<f64> = t.entries.iter().map(|x| x.frequency).collect();
        freqs.sort_by(f64::total_cmp);
        freqs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        assert_eq!(freqs.len(), 4);
        let (lg, le) = (LAMBDA_GROUND_CALIBRATED_GHZ, 255.0);
        for expect in [-(le + lg) / 2.0, (lg - le) / 2.0, (le - lg) / 2.0, (le + lg) / 2.0] {
            assert!(freqs.iter().any(|f| (f - expect).abs() < 1e-9));
        }
    }

    #[test]
    fn sum_rule_per_excited_state() {
        for model in [DipoleModel::OrbitalAveraged, DipoleModel::Identity] {
            let (g, e, _) = table_at(
                &ground(),
                &ManifoldParams::excited(),
                &GeometryConfig::tetrahedral(),
                3.3,
            )
            .unwrap();
            let t = transition_table_with(&g, &e, model).unwrap();
            for i in 1..=4 {
                let s: f64 = (1..=4).map(|j| t.get(i, j).raw_intensity).sum();
                assert!((s - 1.0).abs() < 1e-10, "{model:?} {i}: {s}");
            }
        }
    }

    #[test]
    fn intensities_are_gauge_invariant() {
        let (mut g, mut e, t) = table_at(
            &ground(),
            &ManifoldParams::excited(),
            &GeometryConfig::tetrahedral(),
            1.7,
        )
        .unwrap();
        let phases = [0.3, 1.9, -2.2, 4.0];
        for k in 0..4 {
            g.states[k] *= Complex64::from_polar(1.0, phases[k]);
            e.states[k] *= Complex64::from_polar(1.0, -phases[3 - k] * 1.3);
        }
        let u = transition_table(&g, &e).unwrap();
        for (a, b) in t.entries.iter().zip(&u.entries) {
            assert!((a.raw_intensity - b.raw_intensity).abs() < 1e-14);
        }
    }

    #[test]
    fn mismatched_fields_rejected() {
        let geo = GeometryConfig::tetrahedral();
        let g = manifold_eigensystem(&ground(), &to_center_frame(1.0, &geo)).unwrap();
        let e = manifold_eigensystem(&ManifoldParams::excited(), &to_center_frame(1.1, &geo)).unwrap();
        assert_eq!(transition_table(&g, &e).unwrap_err(), Error::ConfigurationMismatch);
    }

    #[test]
    fn d_lines_below_crossing() {
        let t = at(0.7, &GeometryConfig::tetrahedral());
        let d = identify_d_transitions(&t, driven_partner(0.7, 3.5), DEFAULT_MIN_INTENSITY).unwrap();
        assert_eq!(d.d1.excited, 4);
        assert_eq!(d.d2.excited, d.d1.excited);
        assert_eq!((d.d1.ground, d.d2.ground), (1, 2));
    }

    #[test]
    fn d_lines_above_crossing_use_level_three() {
        let t = at(4.0, &GeometryConfig::tetrahedral());
        let d = identify_d_transitions(&t, driven_partner(4.0, 3.5), DEFAULT_MIN_INTENSITY).unwrap();
        assert_eq!(d.d2.ground, 3);
    }

    #[test]
    fn aligned_field_has_no_lambda() {
        let t = at(0.7, &GeometryConfig::aligned());
        let err = identify_d_transitions(&t, 2, DEFAULT_MIN_INTENSITY).unwrap_err();
        assert!(matches!(err, Error::NoLambda(_)));
        assert!(identify_d_transitions(&t, 4, DEFAULT_MIN_INTENSITY).is_err());
    }

    #[test]
    fn single_line_peak_equals_intensity() {
        let t = at(0.0, &GeometryConfig::aligned());
        let line = t.entries.iter().find(|x| x.intensity > 0.5).unwrap();
        // lines at the same frequency add; pick a frequency and sum the
        // intensities of every line sitting there
        let expect: f64 = t
            .entries
            .iter()
            .filter(|x| (x.frequency - line.frequency).abs() < 1e-9)
            .map(|x| x.intensity)
            .sum();
        let got = render_lines(&t, &[line.frequency], 1e-6)[0];
        assert!((got - expect).abs() < 1e-9);
    }

    #[test]
    fn map_is_linear_in_intensities() {
        let t = at(2.0, &GeometryConfig::tetrahedral());
        let freqs: Vec<f64> = (0..50).map(|k| -300.0 + 12.0 * k as f64).collect();
        let base = render_lines(&t, &freqs, 3.0);
        let mut scaled = t.clone();
        for x in &mut scaled.entries {
            x.intensity *= 2.5;
        }
        for (a, b) in base.iter().zip(render_lines(&scaled, &freqs, 3.0)) {
            assert!((2.5 * a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn spectrum_map_dimensions_and_sign() {
        let fields: Vec<f64> = (0..8).map(|k| k as f64).collect();
        let freqs: Vec<f64> = (0..101).map(|k| -400.0 + 8.0 * k as f64).collect();
        let m = synthesize_spectrum_map(
            &ground(),
            &ManifoldParams::excited(),
            &GeometryConfig::tetrahedral(),
            &fields,
            &freqs,
            DEFAULT_LINE_FWHM_GHZ,
            DipoleModel::default(),
        )
        .unwrap();
        assert_eq!(m.intensity.len(), 8);
        assert!(m
            .intensity
            .iter()
            .all(|r| r.len() == 101 && r.iter().all(|&x| x >= 0.0)));
        assert!(synthesize_spectrum_map(
            &ground(),
            &ManifoldParams::excited(),
            &GeometryConfig::tetrahedral(),
            &[],
            &freqs,
            1.0,
            DipoleModel::Identity,
        )
        .is_err());
    }
}

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use super::params::GeometryConfig;
use super::{ManifoldParams, Vector3};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// A Hermitian 4×4 operator in GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianOperator4(Matrix4<Complex64>);

impl HermitianOperator4 {
    /// Wraps `m`, rejecting it when `‖m − m†‖_max` exceeds 1e-12 GHz.
    pub fn new(m: Matrix4<Complex64>) -> Result<Self> {
        let deviation = hermitian_deviation(&m);
        if deviation > HERMITIAN_TOL * m.camax().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(m))
    }

    pub fn from_real_diagonal(d: [f64; 4]) -> Self {
        Self(Matrix4::from_diagonal(&nalgebra::Vector4::from_fn(|i, _| {
            Complex64::new(d[i], 0.0)
        })))
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn max_abs(&self) -> f64 {
        self.0.camax()
    }
}

pub(crate) fn hermitian_deviation(m: &Matrix4<Complex64>) -> f64 {
    (m - m.adjoint()).camax()
}

/// Applied field of magnitude `b_magnitude` (T) expressed in the center
/// frame, z along the symmetry axis.
pub fn to_center_frame(b_magnitude: f64, geometry: &GeometryConfig) -> Vector3 {
    let theta = geometry.field_angle_deg.to_radians();
    let phi = geometry.field_azimuth_deg.to_radians();
    Vector3::new(
        b_magnitude * theta.sin() * phi.cos(),
        b_magnitude * theta.sin() * phi.sin(),
        b_magnitude * theta.cos(),
    )
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pauli_x() -> Matrix2<Complex64> {
    Matrix2::new(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.))
}

fn pauli_y() -> Matrix2<Complex64> {
    Matrix2::new(c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.))
}

fn pauli_z() -> Matrix2<Complex64> {
    Matrix2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.))
}

/// Effective manifold Hamiltonian
///
/// ```text
/// H = (λ/2)·Lz⊗σz + (α·Lx + β·Ly)⊗1 + f·γ_L·Bz·Lz⊗1 + (γ_S/2)·1⊗(B·σ)
/// ```
///
/// with Pauli-like orbital operators on `{e₊, e₋}` and spin Paulis σ.
pub fn build_hamiltonian(params: &ManifoldParams, b: &Vector3) -> HermitianOperator4 {
    let id = Matrix2::<Complex64>::identity();
    let (lx, ly, lz) = (pauli_x(), pauli_y(), pauli_z());
    let (sx, sy, sz) = (pauli_x(), pauli_y(), pauli_z());
    let r = |x: f64| c(x, 0.0);

    let spin_orbit = lz.kronecker(&sz) * r(params.lambda_so / 2.0);
    let strain = (lx * r(params.strain_alpha) + ly * r(params.strain_beta)).kronecker(&id);
    let orbital_zeeman = lz.kronecker(&id) * r(params.quench_f * params.gamma_l * b.z);
    let spin_field = sx * r(b.x) + sy * r(b.y) + sz * r(b.z);
    let spin_zeeman = id.kronecker(&spin_field) * r(params.gamma_s / 2.0);

    let m: Matrix4<Complex64> = spin_orbit + strain + orbital_zeeman + spin_zeeman;
    // Symmetrize away rounding in the Kronecker products.
    HermitianOperator4((m + m.adjoint()) * r(0.5))
}

use nalgebra::{Matrix3, SMatrix, SVector};
use num_complex::Complex64;

use super::LambdaSystem;
use crate::error::{invalid, Error, Result};

pub type Matrix9 = SMatrix<Complex64, 9, 9>;
pub type Vector9 = SVector<Complex64, 9>;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Lindblad generator on column-stacked 3×3 density matrices,
/// `vec(ρ)[i + 3j] = ρ[i, j]`. Time unit µs.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator(pub Matrix9);

impl Superoperator {
    pub fn matrix(&self) -> &Matrix9 {
        &self.0
    }

    pub fn apply(&self, rho: &Matrix3<Complex64>) -> Matrix3<Complex64> {
        from_vec(&(self.0 * to_vec(rho)))
    }

    /// Slowest nonzero relaxation rate (µs⁻¹): the smallest `−Re λ` over the
    /// generator's eigenvalues once the stationary eigenvalue is removed.
    pub fn slowest_rate(&self) -> f64 {
        let t = self.0.schur().unpack().1;
        let mut eig: Vec<Complex64> = (0..9).map(|i| t[(i, i)]).collect();
        eig.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        eig[1..].iter().map(|l| -l.re).fold(f64::INFINITY, f64::min).max(0.0)
    }
}

pub fn to_vec(rho: &Matrix3<Complex64>) -> Vector9 {
    Vector9::from_column_slice(rho.as_slice())
}

pub fn from_vec(v: &Vector9) -> Matrix3<Complex64> {
    Matrix3::from_column_slice(v.as_slice())
}

fn projector(i: usize, j: usize) -> Matrix3<Complex64> {
    let mut m = Matrix3::zeros();
    m[(i, j)] = ONE;
    m
}

/// Rotating-frame Hamiltonian in MHz, basis (|1⟩, |g₂⟩, |e⟩).
pub fn rotating_frame_hamiltonian(sys: &LambdaSystem) -> Matrix3<Complex64> {
    let d1 = sys.lasers[0].detuning;
    let d2 = sys.lasers[1].detuning;
    let (o1, o2) = (0.5 * sys.rabi[0], 0.5 * sys.rabi[1]);
    let c = |x: f64| Complex64::new(x, 0.0);
    Matrix3::new(
        ZERO,
        ZERO,
        c(o1), //
        ZERO,
        c(d2 - d1),
        c(o2), //
        c(o1),
        c(o2),
        c(-d1),
    )
}

/// Collapse operators `c_k` (rate already folded in), µs^-1/2.
pub fn collapse_operators(sys: &LambdaSystem) -> Vec<Matrix3<Complex64>> {
    let r = &sys.rates;
    let gamma = r.gamma_total * 1e-6;
    let (phonon_dephasing, down, up) = sys.phonon_rates();
    let dephasing = sys.ground_dephasing() + phonon_dephasing;
    let z = projector(1, 1) - projector(0, 0);
    let s = |rate: f64| Complex64::new(rate.sqrt(), 0.0);
    let mut ops = vec![
        projector(0, 2) * s(r.branching[0] * gamma),
        projector(1, 2) * s(r.branching[1] * gamma),
        projector(2, 2) * s(r.gamma_e_dephase * 1e-6),
        z * s(0.5 * dephasing),
    ];
    if down > 0.0 {
        ops.push(projector(0, 1) * s(down));
    }
    if up > 0.0 {
        ops.push(projector(1, 0) * s(up));
    }
    ops
}

/// Generator `−i[H, ·] + Σ_k D[c_k]` in column-stacked form.
pub fn build_liouvillian(sys: &LambdaSystem) -> Superoperator {
    let id = Matrix3::<Complex64>::identity();
    let h = rotating_frame_hamiltonian(sys);
    let i = Complex64::new(0.0, 1.0);
    let mut l = (id.kronecker(&h) - h.transpose().kronecker(&id)) * (-i);
    for c in collapse_operators(sys) {
        let cdc = c.adjoint() * c;
        l += c.conjugate().kronecker(&c);
        l -= (id.kronecker(&cdc) + cdc.transpose().kronecker(&id)) * Complex64::new(0.5, 0.0);
    }
    Superoperator(l)
}

/// 3×3 density matrix in the basis (|1⟩, |g₂⟩, |e⟩).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub Matrix3<Complex64>);

impl DensityMatrix {
    /// Checks Hermiticity (1e-12), unit trace (1e-12) and eigenvalues ≥ −1e-9.
    pub fn new(m: Matrix3<Complex64>) -> Result<Self> {
        let herm = (m - m.adjoint()).camax();
        if herm > 1e-12 {
            return Err(invalid("rho", format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > 1e-12 {
            return Err(invalid("rho", format!("trace {tr} differs from 1")));
        }
        let min = Self(m).min_eigenvalue();
        if min < -1e-9 {
            return Err(invalid("rho", format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(m))
    }

    pub fn pure(level: usize) -> Self {
        Self(projector(level, level))
    }

    pub fn population(&self, level: usize) -> f64 {
        self.0[(level, level)].re
    }

    pub fn excited_population(&self) -> f64 {
        self.population(2)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn matrix(&self) -> &Matrix3<Complex64> {
        &self.0
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (self.0 - other.0).camax()
    }
}

/// Solves `L(ρ) = 0` with `tr ρ = 1` by replacing the first generator row with
/// the trace functional, plus one step of iterative refinement.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    let mut a = l.0;
    for k in 0..9 {
        a[(0, k)] = ZERO;
    }
    for k in [0, 4, 8] {
        a[(0, k)] = ONE;
    }
    let sv = a.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-14 * smax) {
        return Err(Error::NonUniqueSteadyState);
    }
    let mut rhs = Vector9::zeros();
    rhs[0] = ONE;
    let lu = a.lu();
    let mut x = lu.solve(&rhs).ok_or(Error::NonUniqueSteadyState)?;
    let r = rhs - a * x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let m = from_vec(&x);
    let mut m = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = m.trace().re;
    m /= Complex64::new(tr, 0.0);
    Ok(DensityMatrix(m))
}

/// `ρ(t) = exp(L·t) ρ₀` with `t` in seconds, via the scaling-and-squaring
/// matrix exponential.
pub fn time_evolve(l: &Superoperator, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", "must be finite and >= 0"));
    }
    if t == 0.0 {
        return Ok(*rho0);
    }
    let propagator = (l.0 * Complex64::new(t * 1e6, 0.0)).exp();
    let v = propagator * to_vec(&rho0.0);
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Integration("matrix exponential overflowed".into()));
    }
    Ok(DensityMatrix(from_vec(&v)))
}

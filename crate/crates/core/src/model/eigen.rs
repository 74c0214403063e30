use nalgebra::{Matrix2, SymmetricEigen, Vector4};
use num_complex::Complex64;

use super::hamiltonian::hermitian_deviation;
use super::{build_hamiltonian, HermitianOperator4, ManifoldParams, Vector3};
use crate::error::{Error, Result};

/// Eigen-decomposition of one manifold Hamiltonian, energies ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub energies: [f64; 4],
    pub states: [Vector4<Complex64>; 4],
    pub bloch_vectors: [Vector3; 4],
    /// Center-frame field the Hamiltonian was built at, when known.
    pub field: Option<Vector3>,
}

impl EigenSystem {
    pub fn state(&self, index: usize) -> &Vector4<Complex64> {
        &self.states[index]
    }

    /// Spin overlap between eigenstates `i` and `j` (0-based).
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        spin_overlap(&self.states[i], &self.states[j])
    }

    pub fn gap(&self, i: usize, j: usize) -> f64 {
        (self.energies[j] - self.energies[i]).abs()
    }
}

/// Diagonalizes `h`. Degenerate subspaces come back in whatever orthonormal
/// basis the solver picks; each vector's largest component is made real
/// positive so output is deterministic.
pub fn eigensystem(h: &HermitianOperator4) -> Result<EigenSystem> {
    let m = h.matrix();
    let deviation = hermitian_deviation(m);
    if deviation > 1e-12 * m.camax().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = SymmetricEigen::new(*m);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut energies = [0.0; 4];
    let mut states = [Vector4::zeros(); 4];
    let mut bloch_vectors = [Vector3::zeros(); 4];
    for (k, &idx) in order.iter().enumerate() {
        energies[k] = eig.eigenvalues[idx];
        let v = fix_phase(eig.eigenvectors.column(idx).into_owned());
        bloch_vectors[k] = bloch_vector(&v);
        states[k] = v;
    }
    Ok(EigenSystem {
        energies,
        states,
        bloch_vectors,
        field: None,
    })
}

/// Builds and diagonalizes the manifold Hamiltonian at center-frame field `b`.
pub fn manifold_eigensystem(params: &ManifoldParams, b: &Vector3) -> Result<EigenSystem> {
    let mut sys = eigensystem(&build_hamiltonian(params, b))?;
    sys.field = Some(*b);
    Ok(sys)
}

fn fix_phase(v: Vector4<Complex64>) -> Vector4<Complex64> {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = if pivot.norm() > 0.0 {
        pivot.conj() / pivot.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let v = v * phase;
    v / Complex64::new(v.norm(), 0.0)
}

/// Reduced spin density matrix, orbital traced out.
pub(crate) fn reduced_spin(v: &Vector4<Complex64>) -> Matrix2<Complex64> {
    Matrix2::from_fn(|s, t| (0..2).map(|o| v[2 * o + s] * v[2 * o + t].conj()).sum())
}

/// Spin expectation (⟨σx⟩, ⟨σy⟩, ⟨σz⟩) with the orbital traced out.
pub fn bloch_vector(v: &Vector4<Complex64>) -> Vector3 {
    let rho = reduced_spin(v);
    let n = rho[(0, 0)].re + rho[(1, 1)].re;
    Vector3::new(
        2.0 * rho[(1, 0)].re / n,
        2.0 * rho[(1, 0)].im / n,
        (rho[(0, 0)].re - rho[(1, 1)].re) / n,
    )
}

/// Overlap of the reduced spin states of `a` and `b`: the square root of the
/// Uhlmann fidelity of the two 2×2 spin density matrices. For pure reduced
/// states this is `sqrt((1 + ŝa·ŝb)/2)`.
pub fn spin_overlap(a: &Vector4<Complex64>, b: &Vector4<Complex64>) -> f64 {
    let sa = bloch_vector(a);
    let sb = bloch_vector(b);
    let mixed = ((1.0 - sa.norm_squared()).max(0.0) * (1.0 - sb.norm_squared()).max(0.0)).sqrt();
    let fidelity = 0.5 * (1.0 + sa.dot(&sb) + mixed);
    fidelity.clamp(0.0, 1.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{to_center_frame, GeometryConfig};
    use nalgebra::Matrix4;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_operator() {
        let h = HermitianOperator4::from_real_diagonal([3.0, 1.0, 4.0, 2.0]);
        let sys = eigensystem(&h).unwrap();
        assert_eq!(sys.energies, [1.0, 2.0, 3.0, 4.0]);
        for (k, basis) in [1usize, 3, 0, 2].iter().enumerate() {
            assert!((sys.states[k][*basis].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_spin_orbit_only() {
        let p = ManifoldParams::ground();
        let h = build_hamiltonian(&p, &Vector3::zeros());
        let sys = eigensystem(&h).unwrap();
        for k in 0..4 {
            let hv = h.matrix() * sys.states[k];
            let ev = sys.states[k] * c(sys.energies[k], 0.0);
            assert!((hv - ev).camax() < 1e-9 * h.max_abs());
        }
        assert!((sys.energies[0] - sys.energies[1]).abs() < 1e-12);
    }

    #[test]
    fn eigenvector_matrix_is_unitary() {
        let p = ManifoldParams::ground().with_lambda(294.0);
        let b = to_center_frame(2.7, &GeometryConfig::tetrahedral());
        let sys = manifold_eigensystem(&p, &b).unwrap();
        let v = Matrix4::from_columns(&sys.states);
        assert!((v.adjoint() * v - Matrix4::identity()).camax() < 1e-10);
        let trace = build_hamiltonian(&p, &b).trace();
        assert!((sys.energies.iter().sum::<f64>() - trace).abs() < 1e-9);
        assert_eq!(sys.field, Some(b));
    }

    #[test]
    fn overlap_limits() {
        let p = ManifoldParams::ground();
        let b = to_center_frame(2.0, &GeometryConfig::aligned());
        let sys = manifold_eigensystem(&p, &b).unwrap();
        for i in 0..4 {
            assert!((sys.overlap(i, i) - 1.0).abs() < 1e-12);
            for j in 0..4 {
                assert!((sys.overlap(i, j) - sys.overlap(j, i)).abs() < 1e-15);
                let same_spin = (sys.bloch_vectors[i].z - sys.bloch_vectors[j].z).abs() < 1e-9;
                if !same_spin {
                    assert!(sys.overlap(i, j) < 1e-10);
                }
            }
        }
    }

    /// Fidelity through an explicit matrix square root, independent of the
    /// Bloch-vector closed form.
    fn fidelity_oracle(a: &Vector4<Complex64>, b: &Vector4<Complex64>) -> f64 {
        fn sqrtm(m: &Matrix2<Complex64>) -> Matrix2<Complex64> {
            let e = SymmetricEigen::new(*m);
            let d = Matrix2::from_diagonal(&e.eigenvalues.map(|x| c(x.max(0.0).sqrt(), 0.0)));
            e.eigenvectors * d * e.eigenvectors.adjoint()
        }
        let ra = reduced_spin(a);
        let rb = reduced_spin(b);
        let s = sqrtm(&ra);
        let inner = s * rb * s;
        let inner = (inner + inner.adjoint()) * c(0.5, 0.0);
        sqrtm(&inner).trace().re
    }

    #[test]
    fn overlap_matches_matrix_fidelity_for_mixed_states() {
        let p = ManifoldParams {
            strain_alpha: 40.0,
            strain_beta: 15.0,
            ..ManifoldParams::ground()
        };
        let b = to_center_frame(3.1, &GeometryConfig::tetrahedral());
        let sys = manifold_eigensystem(&p, &b).unwrap();
        for i in 0..4 {
            assert!(sys.bloch_vectors[i].norm() <= 1.0 + 1e-12);
            for j in 0..4 {
                let oracle = fidelity_oracle(&sys.states[i], &sys.states[j]);
                assert!((sys.overlap(i, j) - oracle).abs() < 1e-7, "{i}{j}");
            }
        }
    }

    #[test]
    fn crossing_pair_overlap_at_calibrated_point() {
        // With zero strain Lz is conserved, so |2⟩ and |3⟩ are the two spin
        // states of one orbital and stay spin-orthogonal through the gap minimum.
        let p = ManifoldParams::ground().with_lambda(294.0);
        let b = to_center_frame(3.5, &GeometryConfig::tetrahedral());
        let sys = manifold_eigensystem(&p, &b).unwrap();
        let o = sys.overlap(1, 2);
        assert!((o - fidelity_oracle(&sys.states[1], &sys.states[2])).abs() < 1e-7);
        assert!(o < 1e-6, "{o}");
    }
}

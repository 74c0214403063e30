//! Effective 4×4 manifold Hamiltonians: construction, diagonalization,
//! spin structure and field sweeps.
//!
//! Basis order is `{|e₊↑⟩, |e₊↓⟩, |e₋↑⟩, |e₋↓⟩}`, i.e. orbital ⊗ spin with
//! index `2·orbital + spin`. Energies are in GHz (h = 1), fields in tesla.

mod eigen;
mod hamiltonian;
mod levels;
mod params;

pub use eigen::{bloch_vector, eigensystem, manifold_eigensystem, spin_overlap, EigenSystem};
pub use hamiltonian::{build_hamiltonian, to_center_frame, HermitianOperator4};
pub use levels::{calibrate_lambda_ground, find_avoided_crossing, level_sweep, AvoidedCrossing, LevelDiagram};
pub use params::{GeometryConfig, ManifoldParams};

/// Field vector in the center frame (z along the symmetry axis).
pub type Vector3 = nalgebra::Vector3<f64>;

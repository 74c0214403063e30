//! Level structure, optical selection rules and coherent-population-trapping
//! spectroscopy of a split-vacancy color-center spin in diamond.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: 4×4 manifold Hamiltonians, eigenstates, spin overlaps,
//!   field sweeps and the ground-state avoided crossing.
//! - [`transitions`]: ground↔excited transition table, Λ-pair selection and
//!   field-dependent spectra.
//! - [`cpt`]: three-level Λ reduction, Lindblad generator, steady state,
//!   detuning scans and dip-width sweeps.
//! - [`fitting`]: Levenberg–Marquardt engine with Lorentzian, Bloch-model and
//!   width-model fits.
//! - [`io`]: JSON run configuration, seeded noise, CSV and manifest output.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod cpt;
pub mod error;
pub mod fitting;
pub mod io;
pub mod model;
pub mod transitions;

pub use error::{Error, Result};

//! Driven Λ-system spectroscopy: reduction from the two manifolds, Lindblad
//! generator, steady state, detuning scans and dip-width sweeps.
//!
//! Inside this module time is in µs and every frequency (detuning, Rabi
//! frequency, rate) is an ordinary frequency in MHz, so a rate of
//! 4.0e6 s⁻¹ enters as 4.0. No factors of 2π are applied.

mod lambda;
mod liouvillian;
mod scan;
mod width;

pub use lambda::{reduce_to_lambda, saturation_rabi, LambdaSetup, LambdaSystem, LaserConfig, PhononChannel, RateSet};
pub use liouvillian::{
    build_liouvillian, collapse_operators, from_vec, rotating_frame_hamiltonian, steady_state, time_evolve, to_vec,
    DensityMatrix, Matrix9, Superoperator, Vector9,
};
pub use scan::{
    calibrate_laser_dephasing, cpt_scan_1d, cpt_scan_2d, dip_width_vs_field, fluorescence, linspace, measure_dip_width,
    ScanResult, WidthPoint, WidthSweep, DIP_SCAN_POINTS,
};
pub use width::{overlap_boltzmann_model, WidthModelParams};

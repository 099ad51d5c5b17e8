//! Quantum-limited sensitivity analysis for lossy laser interferometers.
//!
//! The crate simulates two-mode fixed-photon-number states in the Fock basis,
//! pushes them through photon loss and a differential phase shift, and computes
//! the quantum Fisher information (QFI) of the result. On top of that it
//! provides:
//!
//! * analytic precision bounds for phase estimation under loss
//!   ([`qfi::qfi_bound_fixed_n`], [`qfi::phase_bound_mean_n`]),
//! * a numerical optimizer for the best fixed-photon-number probe state
//!   ([`optimize::optimize_state`]) together with a large-N extrapolation of
//!   the optimal precision,
//! * a frequency-domain model of a signal-recycled Michelson interferometer
//!   (GEO 600 parameters shipped as defaults) converting phase noise into
//!   strain-normalized noise spectral densities ([`geo`]),
//! * comparison of the coherent-plus-squeezed-vacuum (CSV) strategy against
//!   the optimal-probe precision ([`optimize::precision_ratio`]),
//! * a small persistence layer for optimizer results and output tables
//!   ([`store`]).
//!
//! Phase convention: the phase is imprinted on arm `b` as `exp(-i n_b phi)`;
//! see [`fock::PhaseConvention`].

pub mod constants;
mod error;
pub mod fock;
pub mod geo;
pub mod optimize;
pub mod qfi;
pub mod store;
pub mod tolerances;

pub use error::Error;

/// Crate-wide result alias for computational errors.
pub type Result<T> = std::result::Result<T, Error>;

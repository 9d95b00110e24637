//! Simulation of two dissipatively stabilized Kerr self-oscillators.
//!
//! The crate is organized bottom-up:
//!
//! * [`qspace`]: truncated Fock spaces, sparse operators and Lindblad
//!   superoperators.
//! * [`models`]: circuit, displaced-frame and effective Kerr model builders.
//! * [`evolve`]: master-equation integration, steady states and homodyne
//!   trajectories.
//! * [`measures`]: fidelities, Wigner functions, synchronization measure,
//!   logarithmic negativity and cross-correlations.
//! * [`experiment`]: configuration, sweeps, optimization and result files.
//!
//! Rates are angular frequencies in rad/µs and times are in µs.

pub mod error;
pub mod evolve;
pub mod experiment;
pub mod measures;
pub mod models;
pub mod qspace;
pub mod units;

pub use error::{Error, Result};

/// Complex double used for every operator entry.
pub type C64 = num_complex::Complex64;

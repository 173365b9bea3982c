//! Forward models and inverse problems for a scanning superconducting-resonator
//! microscope.
//!
//! The crate covers the resonator reflection response and its fitting, the
//! two-level-system and quasiparticle loss channels, the tip-sample
//! capacitance and scan imaging chain, phase-noise to capacitance-noise
//! conversion, and a transmon coupled dispersively to the probe resonator.
//!
//! All internal quantities are strict SI (Hz, W, K, F, s, m). Lab units such as
//! GHz, dBm or fF only appear at I/O boundaries.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod lm;
pub mod loss;
pub mod quantities;
pub mod qubit;
pub mod resonator;
pub mod rng;
pub mod sensitivity;
pub mod special;
pub mod tip;

pub use error::{Error, Result};
pub use quantities::{dbm_to_watts, watts_to_dbm, Estimate, PhysicalConstants, Power, Temperature, CONSTANTS};
pub use resonator::{
    average_photon_number, fit_s11, s11_model, synthesize_trace, total_q, ComplexTrace, FitConfig, FitResult,
    NoiseSpec, ResonatorParams,
};

//! Decoherence analysis for spin qubits in nanocrystals.
//!
//! The crate covers the forward problem (noise spectrum to coherence decay,
//! analytically through filter functions and by Monte Carlo), the inverse
//! problem (coherence traces back to a noise spectrum and its model fit),
//! relaxation and bath-classification fits, and the spherical band-bending
//! model that predicts charge-state depletion of paramagnetic donors.
//!
//! Units are SI throughout; frequencies are angular (rad/s) and spectra are
//! one-sided.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extract;
pub mod filterfn;
pub mod fitkit;
pub mod quad;
pub mod bandbend;
pub mod bathsim;
pub mod cli;
pub mod config;
pub mod provenance;
pub mod spectra;
pub mod trace;

pub use error::{Error, Result};

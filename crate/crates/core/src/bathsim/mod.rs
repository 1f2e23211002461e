//! Monte Carlo coherence simulation.
//!
//! Two bath models are provided. [`gaussian`] drives the qubit with a sum of
//! Ornstein–Uhlenbeck processes (one per Lorentzian, plus a log-spaced bank
//! standing in for a `1/ω^a` term) and supports finite-duration π pulses.
//! [`dipolar`] places discrete telegraph-flipping spins around the probe and
//! computes the echo decay, optionally re-drawing positions every shot.
//!
//! Every shot draws from its own ChaCha8 stream derived from `(seed, shot)`,
//! and shot results are summed in shot order after the parallel map, so the
//! output does not depend on the thread count.

pub mod dipolar;
pub mod gaussian;
pub mod ou;

pub use dipolar::{
    dipolar_echo_ensemble, telegraph_echo_coherence, DipolarBathConfig, DipolarEchoResult, Hopping,
};
pub use gaussian::{
    simulate_bath_coherence, simulate_bath_trace, simulate_coherence, CoherencePoint, GaussianBath,
    OuComponent, PulseDephasingMode,
};
pub use ou::{ou_trajectory, OUParams};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for one shot.
pub(crate) fn shot_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

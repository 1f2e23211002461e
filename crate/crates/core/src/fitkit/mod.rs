//! Model fitting: decay curves, scaling laws, relaxation rates, noise
//! spectra, bath classification, PL unmixing and DEER.
//!
//! All fitters are deterministic for given data; none of them draws random
//! numbers.

pub mod classify;
pub mod expfit;
pub mod lm;
pub mod noise;
pub mod powerlaw;
pub mod rates;
pub mod spectral;
pub mod stretched;

pub use classify::{classify_bath, BathClassification, BathVerdict};
pub use expfit::{fit_exponential, ExpFit};
pub use noise::{fit_noise_model, LorentzianEstimate, NoiseFitResult};
pub use powerlaw::{fit_power_law, PowerLawFit};
pub use rates::{fit_rate_equations, rate_matrix, RateFit, RatePair};
pub use spectral::{deer_signals, fit_deer_fid, unmix_pl, DeerSignals, UnmixResult};
pub use stretched::{fit_amplitude_monotone, fit_stretched_exp, MonotoneAmplitudeFit, StretchedExpFit};

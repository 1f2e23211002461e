//! Three-level spin relaxation: single-quantum rate `Ω` on each `0 ↔ ±1`
//! link and double-quantum rate `γ` on `+1 ↔ −1`.
//!
//! With populations ordered `(p₀, p₊₁, p₋₁)` the rate matrix
//!
//! ```text
//!     ⎡ −2Ω     Ω        Ω     ⎤
//! W = ⎢  Ω   −(Ω+γ)      γ     ⎥
//!     ⎣  Ω      γ     −(Ω+γ)   ⎦
//! ```
//!
//! is symmetric with eigenpairs `0 ↔ (1,1,1)`, `−3Ω ↔ (2,−1,−1)` and
//! `−(Ω+2γ) ↔ (0,1,−1)`. Starting in `|0⟩`, `p₀ − p₋₁ = e^{−3Ωt}`; starting
//! in `|−1⟩`, `p₋₁ − p₊₁ = e^{−(Ω+2γ)t}`. These two difference signals give
//! `T₁^SQ = 1/(3Ω)` and `T₁^DQ = 1/(Ω+2γ)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::expfit::{fit_exponential, ExpFit};
use crate::error::{Error, Result};
use crate::trace::RelaxationTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub omega_sq_rate: f64,
    pub gamma_dq_rate: f64,
    pub t1_sq: f64,
    pub t1_dq: f64,
}

impl RatePair {
    pub fn new(omega: f64, gamma: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid(format!("Omega must be > 0, got {omega}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")));
        }
        Ok(Self {
            omega_sq_rate: omega,
            gamma_dq_rate: gamma,
            t1_sq: 1.0 / (3.0 * omega),
            t1_dq: 1.0 / (omega + 2.0 * gamma),
        })
    }

    /// Rates from measured lifetimes: `Ω = 1/(3T₁^SQ)`, `γ = (1/T₁^DQ − Ω)/2`.
    pub fn from_lifetimes(t1_sq: f64, t1_dq: f64) -> Result<Self> {
        let omega = 1.0 / (3.0 * t1_sq);
        Self::new(omega, 0.5 * (1.0 / t1_dq - omega))
    }
}

pub fn rate_matrix(omega: f64, gamma: f64) -> Matrix3<f64> {
    Matrix3::new(
        -2.0 * omega,
        omega,
        omega,
        omega,
        -(omega + gamma),
        gamma,
        omega,
        gamma,
        -(omega + gamma),
    )
}

/// Relaxation eigenvalues `(3Ω, Ω + 2γ)` (negated eigenvalues of `W`).
pub fn relaxation_rates(omega: f64, gamma: f64) -> (f64, f64) {
    (3.0 * omega, omega + 2.0 * gamma)
}

/// Populations `(p₀, p₊₁, p₋₁)` at time `t` from `initial`, by spectral
/// decomposition of `W`.
pub fn populations(omega: f64, gamma: f64, initial: Vector3<f64>, t: f64) -> Vector3<f64> {
    let v0 = Vector3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
    let v1 = Vector3::new(2.0, -1.0, -1.0) / 6f64.sqrt();
    let v2 = Vector3::new(0.0, 1.0, -1.0) / 2f64.sqrt();
    let (r1, r2) = relaxation_rates(omega, gamma);
    v0 * v0.dot(&initial) + v1 * (v1.dot(&initial) * (-r1 * t).exp()) + v2 * (v2.dot(&initial) * (-r2 * t).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rates: RatePair,
    pub sq: ExpFit,
    pub dq: ExpFit,
    /// The DQ decay was faster than `Ω` allows only with `γ < 0`; `γ` is
    /// reported clipped to 0.
    pub gamma_negative: bool,
    /// Unclipped `γ`.
    pub gamma_raw: f64,
}

/// Fits the SQ and DQ difference signals as single exponentials with rates
/// `3Ω` and `Ω + 2γ`.
pub fn fit_rate_equations(sq: &RelaxationTrace, dq: &RelaxationTrace) -> Result<RateFit> {
    if sq.samples.is_empty() || dq.samples.is_empty() {
        return Err(Error::data("both relaxation traces must be nonempty"));
    }
    let sq_fit = fit_exponential(&sq.samples)?;
    let dq_fit = fit_exponential(&dq.samples)?;
    let omega = sq_fit.rate / 3.0;
    if !(omega > 0.0) {
        return Err(Error::Fit(format!("SQ decay rate is not positive ({:e})", sq_fit.rate)));
    }
    let gamma_raw = 0.5 * (dq_fit.rate - omega);
    // Two standard errors of the combination count as noise.
    let tol = 2.0 * 0.5 * (dq_fit.rate_stderr.powi(2) + (sq_fit.rate_stderr / 3.0).powi(2)).sqrt();
    let gamma_negative = gamma_raw < -tol.max(1e-12 * omega);
    if gamma_negative {
        log::warn!("fitted gamma = {gamma_raw:e} s^-1 is negative beyond noise");
    }
    Ok(RateFit {
        rates: RatePair::new(omega, gamma_raw.max(0.0))?,
        sq: sq_fit,
        dq: dq_fit,
        gamma_negative,
        gamma_raw,
    })
}

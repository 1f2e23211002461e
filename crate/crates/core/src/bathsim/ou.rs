//! Ornstein–Uhlenbeck noise: sampled paths and the exact joint update of the
//! process together with its time integral.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::LorentzianComponent;

/// An OU process with rms amplitude `delta` (stationary variance `delta²`),
/// correlation time `tau_c`, sampling step `dt` and RNG seed.
///
/// A Lorentzian spectral component with coupling `Δ` is realized by an OU
/// process of rms `Δ/√(2π)`; see [`OUParams::from_lorentzian`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OUParams {
    pub delta: f64,
    pub tau_c: f64,
    pub dt: f64,
    pub seed: u64,
}

impl OUParams {
    pub fn new(delta: f64, tau_c: f64, dt: f64, seed: u64) -> Result<Self> {
        let p = Self {
            delta,
            tau_c,
            dt,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// The process whose noise spectrum is `component`, sampled at
    /// `τ_c/10`.
    pub fn from_lorentzian(component: &LorentzianComponent, seed: u64) -> Self {
        Self {
            delta: component.delta / (2.0 * std::f64::consts::PI).sqrt(),
            tau_c: component.tau_c,
            dt: component.tau_c / 10.0,
            seed,
        }
    }

    /// Coupling `Δ` of the Lorentzian spectrum this process realizes.
    pub fn spectral_delta(&self) -> f64 {
        self.delta * (2.0 * std::f64::consts::PI).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::invalid(format!("OU delta must be >= 0, got {}", self.delta)));
        }
        if !(self.tau_c.is_finite() && self.tau_c > 0.0) {
            return Err(Error::invalid(format!("OU tau_c must be > 0, got {}", self.tau_c)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("OU dt must be > 0"));
        }
        if self.dt > self.tau_c / 10.0 * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "OU dt = {:e} s exceeds tau_c/10 = {:e} s",
                self.dt,
                self.tau_c / 10.0
            )));
        }
        Ok(())
    }
}

/// Samples `b(k·dt)` for `k = 0..=ceil(duration/dt)` by the exact update
/// `b' = b e^{−dt/τ} + Δ √(1 − e^{−2dt/τ}) ξ`, starting from the stationary
/// distribution.
pub fn ou_trajectory(params: &OUParams, duration: f64) -> Result<Vec<f64>> {
    params.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid("trajectory duration must be > 0"));
    }
    let steps = (duration / params.dt).ceil() as usize;
    let mut rng = super::shot_rng(params.seed, 0);
    let rho = (-params.dt / params.tau_c).exp();
    let kick = params.delta * (-(-2.0 * params.dt / params.tau_c).exp_m1()).sqrt();
    let mut b = params.delta * rng.sample::<f64, _>(StandardNormal);
    let mut path = Vec::with_capacity(steps + 1);
    path.push(b);
    for _ in 0..steps {
        b = rho * b + kick * rng.sample::<f64, _>(StandardNormal);
        path.push(b);
    }
    Ok(path)
}

/// `x − 2(1 − e^{−x}) + (1 − e^{−2x})/2`, accurate for small `x`.
fn integral_variance_shape(x: f64) -> f64 {
    if x < 1e-3 {
        x * x * x * (1.0 / 3.0 - x * (0.25 - x * (7.0 / 60.0 - x / 24.0)))
    } else {
        let em1 = -(-x).exp_m1();
        let e2m1 = -(-2.0 * x).exp_m1();
        x - 2.0 * em1 + 0.5 * e2m1
    }
}

/// Exact transition of `(b, ∫b)` over a step `h` for a unit-variance OU
/// process with correlation time `τ`:
///
/// ```text
/// b' = ρ b + η₁,   I = τ(1 − ρ) b + η₂,   ρ = e^{−h/τ}
/// Var η₁ = 1 − ρ²,  Var η₂ = 2τ²[x − 2(1−ρ) + (1−ρ²)/2],  Cov = τ(1−ρ)²
/// ```
///
/// stored as a lower Cholesky factor.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OuStep {
    pub rho: f64,
    pub drift: f64,
    pub l11: f64,
    pub l21: f64,
    pub l22: f64,
}

impl OuStep {
    pub fn new(tau: f64, h: f64) -> Self {
        let x = h / tau;
        let rho = (-x).exp();
        let one_m_rho = -(-x).exp_m1();
        let v1 = -(-2.0 * x).exp_m1();
        let v2 = 2.0 * tau * tau * integral_variance_shape(x);
        let c = tau * one_m_rho * one_m_rho;
        let l11 = v1.sqrt();
        let l21 = if l11 > 0.0 { c / l11 } else { 0.0 };
        let l22 = (v2 - l21 * l21).max(0.0).sqrt();
        Self {
            rho,
            drift: tau * one_m_rho,
            l11,
            l21,
            l22,
        }
    }

    /// Advances `b` (unit variance) and returns `∫b` over the step.
    #[inline]
    pub fn advance<R: Rng + ?Sized>(&self, b: &mut f64, rng: &mut R) -> f64 {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let integral = self.drift * *b + self.l21 * z1 + self.l22 * z2;
        *b = self.rho * *b + self.l11 * z1;
        integral
    }

    /// Advances `b` without tracking the integral.
    #[inline]
    pub fn advance_state<R: Rng + ?Sized>(&self, b: &mut f64, rng: &mut R) {
        let z1: f64 = rng.sample(StandardNormal);
        *b = self.rho * *b + self.l11 * z1;
    }
}

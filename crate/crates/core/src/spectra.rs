//! Parameterized noise power spectra.
//!
//! All spectra are one-sided, `ω ∈ [0, ∞)`, in angular frequency (rad/s).
//! Frequencies given in Hz are converted with `ω = 2πf`. Coupling strengths
//! `Δ` and `Δ_e` are taken to be in rad/s-consistent units so that the
//! decoherence exponent built from these spectra is dimensionless. The
//! published fit captions quote `Δ` without units; rad/s is assumed.
//!
//! The model is a sum of Lorentzian baths, an optional `Δ_e/ω^a` term and a
//! constant white floor:
//!
//! ```text
//! S(ω) = Σ_k Δ_k² τ_k / (π (1 + (ω τ_k)²)) + Δ_e / ω^a + S₀
//! ```

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convert a frequency in Hz to angular frequency in rad/s.
pub fn hz_to_rad(f_hz: f64) -> f64 {
    TAU * f_hz
}

/// Convert an angular frequency in rad/s to Hz.
pub fn rad_to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// One Lorentzian bath: coupling strength `delta` (rad/s) and correlation
/// time `tau_c` (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianComponent {
    pub delta: f64,
    pub tau_c: f64,
}

impl LorentzianComponent {
    pub fn new(delta: f64, tau_c: f64) -> Result<Self> {
        let c = Self { delta, tau_c };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::invalid(format!(
                "Lorentzian delta must be finite and >= 0, got {}",
                self.delta
            )));
        }
        if !(self.tau_c.is_finite() && self.tau_c > 0.0) {
            return Err(Error::invalid(format!(
                "Lorentzian tau_c must be finite and > 0, got {}",
                self.tau_c
            )));
        }
        Ok(())
    }

    /// Spectral density at `omega` (no domain checks).
    #[inline]
    pub fn density(&self, omega: f64) -> f64 {
        let x = omega * self.tau_c;
        self.delta * self.delta * self.tau_c / (PI * (1.0 + x * x))
    }

    /// `∫₀^∞ S(ω) dω = Δ²/2`.
    pub fn integral(&self) -> f64 {
        0.5 * self.delta * self.delta
    }

    /// Zero-frequency level `Δ²τ/π`.
    pub fn dc_level(&self) -> f64 {
        self.delta * self.delta * self.tau_c / PI
    }

    /// `∫_w^∞ S(ω)/ω² dω`, closed form.
    pub(crate) fn inverse_square_tail(&self, w: f64) -> f64 {
        // 1/(ω²(1+ω²τ²)) = 1/ω² - τ²/(1+ω²τ²)
        // => ∫_w^∞ = 1/w - τ·atan(1/(wτ)); expand when wτ is large.
        let tau = self.tau_c;
        let z = 1.0 / (w * tau);
        let bracket = if z < 0.05 {
            let z2 = z * z;
            tau * z * z2 * (1.0 / 3.0 - z2 * (1.0 / 5.0 - z2 * (1.0 / 7.0 - z2 / 9.0)))
        } else {
            1.0 / w - tau * z.atan()
        };
        self.dc_level() * bracket
    }
}

/// The `Δ_e/ω^a` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneOverFComponent {
    pub delta_e: f64,
    pub exponent_a: f64,
}

impl OneOverFComponent {
    pub fn new(delta_e: f64, exponent_a: f64) -> Result<Self> {
        let c = Self {
            delta_e,
            exponent_a,
        };
        c.validate()?;
        Ok(c)
    }

    /// Amplitude fixed by a double-quantum anchor: `Δ_e = S_DQ · ω_DQ^a`.
    pub fn anchored(s_dq: f64, omega_dq: f64, exponent_a: f64) -> Result<Self> {
        if !(omega_dq > 0.0) {
            return Err(Error::invalid("anchor frequency must be > 0"));
        }
        Self::new(s_dq * omega_dq.powf(exponent_a), exponent_a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_e.is_finite() && self.delta_e >= 0.0) {
            return Err(Error::invalid(format!(
                "1/f amplitude must be finite and >= 0, got {}",
                self.delta_e
            )));
        }
        if !(self.exponent_a.is_finite() && self.exponent_a > 0.0 && self.exponent_a < 3.0) {
            return Err(Error::invalid(format!(
                "1/f exponent must lie in (0, 3), got {}",
                self.exponent_a
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn density(&self, omega: f64) -> f64 {
        self.delta_e * omega.powf(-self.exponent_a)
    }

    /// `∫_w^∞ Δ_e ω^{-a-2} dω`.
    pub(crate) fn inverse_square_tail(&self, w: f64) -> f64 {
        let p = self.exponent_a + 1.0;
        self.delta_e * w.powf(-p) / p
    }
}

/// Lorentzian sum + optional `1/f^a` term + white floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseSpectrum {
    #[serde(default)]
    pub lorentzians: Vec<LorentzianComponent>,
    #[serde(default)]
    pub one_over_f: Option<OneOverFComponent>,
    #[serde(default)]
    pub white_floor: f64,
}

impl NoiseSpectrum {
    pub fn white(level: f64) -> Self {
        Self {
            white_floor: level,
            ..Self::default()
        }
    }

    pub fn lorentzian(delta: f64, tau_c: f64) -> Self {
        Self {
            lorentzians: vec![LorentzianComponent { delta, tau_c }],
            ..Self::default()
        }
    }

    pub fn with_lorentzian(mut self, delta: f64, tau_c: f64) -> Self {
        self.lorentzians.push(LorentzianComponent { delta, tau_c });
        self
    }

    pub fn with_one_over_f(mut self, delta_e: f64, exponent_a: f64) -> Self {
        self.one_over_f = Some(OneOverFComponent {
            delta_e,
            exponent_a,
        });
        self
    }

    pub fn with_white_floor(mut self, level: f64) -> Self {
        self.white_floor = level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for l in &self.lorentzians {
            l.validate()?;
        }
        if let Some(f) = &self.one_over_f {
            f.validate()?;
        }
        if !(self.white_floor.is_finite() && self.white_floor >= 0.0) {
            return Err(Error::invalid(format!(
                "white floor must be finite and >= 0, got {}",
                self.white_floor
            )));
        }
        Ok(())
    }

    /// True when no component carries any weight.
    pub fn is_zero(&self) -> bool {
        self.white_floor == 0.0
            && self.lorentzians.iter().all(|l| l.delta == 0.0)
            && self.one_over_f.is_none_or(|f| f.delta_e == 0.0)
    }

    /// Everything except the white floor, evaluated without checks.
    #[inline]
    pub(crate) fn colored_density(&self, omega: f64) -> f64 {
        let mut s: f64 = self.lorentzians.iter().map(|l| l.density(omega)).sum();
        if let Some(f) = &self.one_over_f {
            s += f.density(omega);
        }
        s
    }

    /// `S(ω)` without domain checks. Callers guarantee `omega > 0`.
    #[inline]
    pub fn density(&self, omega: f64) -> f64 {
        self.colored_density(omega) + self.white_floor
    }

    /// `S(ω)`; rejects negative `omega`, and `omega = 0` when a `1/f^a` term
    /// is present.
    pub fn eval_total(&self, omega: f64) -> Result<f64> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::Domain(format!("omega must be >= 0, got {omega}")));
        }
        if omega == 0.0 && self.one_over_f.is_some_and(|f| f.delta_e > 0.0) {
            return Err(Error::Domain(
                "1/f^a term diverges at omega = 0".to_string(),
            ));
        }
        let mut s: f64 = self.lorentzians.iter().map(|l| l.density(omega)).sum();
        if let Some(f) = &self.one_over_f {
            if f.delta_e > 0.0 {
                s += f.density(omega);
            }
        }
        Ok(s + self.white_floor)
    }

    /// `∫_w^∞ S_colored(ω)/ω² dω`.
    pub(crate) fn colored_inverse_square_tail(&self, w: f64) -> f64 {
        let mut t: f64 = self
            .lorentzians
            .iter()
            .map(|l| l.inverse_square_tail(w))
            .sum();
        if let Some(f) = &self.one_over_f {
            t += f.inverse_square_tail(w);
        }
        t
    }

    /// Shortest correlation time among Lorentzians, if any.
    pub fn min_tau_c(&self) -> Option<f64> {
        self.lorentzians
            .iter()
            .filter(|l| l.delta > 0.0)
            .map(|l| l.tau_c)
            .reduce(f64::min)
    }
}

/// `Σ_k Δ_k² τ_k / (π (1 + (ω τ_k)²))`.
pub fn eval_lorentzian_sum(components: &[LorentzianComponent], omega: f64) -> Result<f64> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::Domain(format!("omega must be >= 0, got {omega}")));
    }
    let mut s = 0.0;
    for c in components {
        c.validate()?;
        s += c.density(omega);
    }
    Ok(s)
}

/// Reference spectra of the bare and core-shell particle groups.
///
/// Both use a double-quantum anchor `S_DQ = 1e4 s⁻¹` at `ω_DQ = 2π·18.8 MHz`
/// and a 1 ns correlation time for the fast bath (reported only as an upper
/// bound).
pub mod reference {
    use super::*;

    /// Default DQ anchor rate (s⁻¹).
    pub const S_DQ: f64 = 1.0e4;

    /// Default DQ probe frequency (rad/s).
    pub fn omega_dq() -> f64 {
        hz_to_rad(18.8e6)
    }

    /// Default SQ probe frequency (rad/s).
    pub fn omega_sq() -> f64 {
        hz_to_rad(2.87e9)
    }

    /// Core-shell fit: Δ₁ = 2.9e6, τ₁ = 40 ns, Δ₂ = 1.3e7, τ₂ = 1 ns, a = 1.6.
    pub fn core_shell() -> NoiseSpectrum {
        let a = 1.6;
        NoiseSpectrum::lorentzian(2.9e6, 40e-9)
            .with_lorentzian(1.3e7, 1e-9)
            .with_one_over_f(S_DQ * omega_dq().powf(a), a)
    }

    /// Bare fit: Δ = 2.4e7, τ = 1 ns, a = 1.7.
    pub fn bare() -> NoiseSpectrum {
        let a = 1.7;
        NoiseSpectrum::lorentzian(2.4e7, 1e-9).with_one_over_f(S_DQ * omega_dq().powf(a), a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lorentzian_examples() {
        let c = [LorentzianComponent {
            delta: 1.0,
            tau_c: 1.0,
        }];
        assert_relative_eq!(eval_lorentzian_sum(&c, 0.0).unwrap(), 1.0 / PI, max_relative = 1e-15);
        assert_relative_eq!(
            eval_lorentzian_sum(&c, 1.0).unwrap(),
            1.0 / (2.0 * PI),
            max_relative = 1e-15
        );
    }

    #[test]
    fn lorentzian_rejects_bad_input() {
        let good = [LorentzianComponent {
            delta: 1.0,
            tau_c: 1.0,
        }];
        assert!(eval_lorentzian_sum(&good, -1.0).is_err());
        let bad = [LorentzianComponent {
            delta: 1.0,
            tau_c: 0.0,
        }];
        assert!(eval_lorentzian_sum(&bad, 1.0).is_err());
    }

    #[test]
    fn total_examples() {
        let w = NoiseSpectrum::white(5.0);
        assert_eq!(w.eval_total(123.0).unwrap(), 5.0);
        let f = NoiseSpectrum::default().with_one_over_f(1.0, 1.0);
        assert_relative_eq!(f.eval_total(2.0).unwrap(), 0.5);
        assert!(matches!(f.eval_total(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn tail_moment_matches_quadrature() {
        let l = LorentzianComponent {
            delta: 2.0,
            tau_c: 3e-8,
        };
        for &w in &[1e5, 3e7, 1e9, 1e11] {
            let exact = l.inverse_square_tail(w);
            let numeric = crate::quad::integrate(
                |u: f64| {
                    // ω = w/u, dω = -w/u² du
                    let om = w / u;
                    l.density(om) / (om * om) * w / (u * u)
                },
                0.0,
                1.0,
                1e-12,
                0.0,
            )
            .unwrap()
            .value;
            assert_relative_eq!(exact, numeric, max_relative = 1e-8);
        }
    }

    #[test]
    fn anchored_amplitude_round_trips() {
        let f = OneOverFComponent::anchored(1e4, reference::omega_dq(), 1.6).unwrap();
        assert_relative_eq!(
            f.density(reference::omega_dq()),
            1e4,
            max_relative = 1e-14
        );
    }
}

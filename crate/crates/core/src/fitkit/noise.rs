//! Fit of binned spectra to Lorentzians plus a DQ-anchored `1/ω^a` term.
//!
//! ```text
//! S(ω) = Σ_k Δ_k² τ_k / (π(1 + ω²τ_k²)) + Δ_e/ω^a [+ S₀],   Δ_e = S_DQ · ω_DQ^a
//! ```
//!
//! The anchor removes `Δ_e` as a free parameter: whatever `a` the fit picks,
//! the `1/ω^a` term passes through the DQ relaxation point. Residuals are
//! taken in `ln S` because the data span decades. Amplitudes and correlation
//! times are fitted as logarithms.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions, LmOutcome};
use crate::error::{Error, Result};
use crate::extract::BinnedSpectrum;
use crate::spectra::{LorentzianComponent, NoiseSpectrum, OneOverFComponent};

/// Starting correlation times, seconds.
pub const TAU_STARTS: [f64; 5] = [0.1e-9, 1e-9, 10e-9, 100e-9, 1000e-9];
/// Range of the `1/ω^a` exponent.
pub const EXPONENT_BOUNDS: (f64, f64) = (1.0, 2.0);
/// A component whose largest probed `ωτ` stays below this is not resolved.
pub const DEGENERATE_OMEGA_TAU: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianEstimate {
    pub delta: f64,
    pub tau_c: f64,
    /// `Δ²τ_c`, the low-frequency level times π; determined even when
    /// `τ_c` is not.
    pub delta_sq_tau: f64,
    /// The data only sample the flat part of this component.
    pub degenerate: bool,
    /// Profile-likelihood upper bound on `τ_c` for degenerate components
    /// (`None` if the scan never left the confidence region).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_upper_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFitResult {
    pub spectrum: NoiseSpectrum,
    pub components: Vec<LorentzianEstimate>,
    pub exponent_a: f64,
    pub delta_e: f64,
    pub s_dq: f64,
    pub omega_dq: f64,
    pub white_floor: Option<f64>,
    /// Coefficient of determination of `ln S`.
    pub r_squared: f64,
    /// Sum of squared log residuals.
    pub ssr: f64,
    pub n_bins: usize,
}

/// Parameter layout: `[lnΔ₁, lnτ₁, …, a, (lnS₀)]`.
struct Model<'a> {
    omega: &'a [f64],
    ln_s: &'a [f64],
    n_l: usize,
    white: bool,
    s_dq: f64,
    omega_dq: f64,
}

impl Model<'_> {
    fn n_params(&self) -> usize {
        2 * self.n_l + 1 + usize::from(self.white)
    }

    fn a_index(&self) -> usize {
        2 * self.n_l
    }

    /// Model value and its gradient with respect to the parameters.
    fn eval(&self, p: &[f64], w: f64, grad: Option<&mut [f64]>) -> f64 {
        let mut total = 0.0;
        let mut parts = [0.0; 8];
        for k in 0..self.n_l {
            let d = p[2 * k].exp();
            let tau = p[2 * k + 1].exp();
            let wt2 = (w * tau).powi(2);
            let l = d * d * tau / (PI * (1.0 + wt2));
            total += l;
            parts[2 * k] = 2.0 * l;
            parts[2 * k + 1] = l * (1.0 - wt2) / (1.0 + wt2);
        }
        let a = p[self.a_index()];
        let ratio = self.omega_dq / w;
        let f = self.s_dq * ratio.powf(a);
        total += f;
        parts[self.a_index()] = f * ratio.ln();
        if self.white {
            let s0 = p[self.a_index() + 1].exp();
            total += s0;
            parts[self.a_index() + 1] = s0;
        }
        if let Some(g) = grad {
            g.copy_from_slice(&parts[..self.n_params()]);
        }
        total
    }
}

/// Fits with some parameters held at given values.
fn fit_subset(model: &Model<'_>, start: &[f64], fixed: &[(usize, f64)], bounds: &(Vec<f64>, Vec<f64>)) -> LmOutcome {
    let n = model.n_params();
    let free: Vec<usize> = (0..n).filter(|i| !fixed.iter().any(|f| f.0 == *i)).collect();
    let full = |q: &[f64]| -> Vec<f64> {
        let mut p = start.to_vec();
        for (j, &i) in free.iter().enumerate() {
            p[i] = q[j];
        }
        for &(i, v) in fixed {
            p[i] = v;
        }
        p
    };
    let residual = |q: &[f64], r: &mut [f64]| {
        let p = full(q);
        for (i, (&w, &ls)) in model.omega.iter().zip(model.ln_s).enumerate() {
            r[i] = model.eval(&p, w, None).ln() - ls;
        }
    };
    let jacobian = |q: &[f64], j: &mut DMatrix<f64>| {
        let p = full(q);
        let mut g = vec![0.0; n];
        for (i, &w) in model.omega.iter().enumerate() {
            let m = model.eval(&p, w, Some(&mut g[..]));
            for (c, &k) in free.iter().enumerate() {
                j[(i, c)] = g[k] / m;
            }
        }
    };
    let opts = LmOptions {
        lower: Some(free.iter().map(|&i| bounds.0[i]).collect()),
        upper: Some(free.iter().map(|&i| bounds.1[i]).collect()),
        ..Default::default()
    };
    let q0: Vec<f64> = free.iter().map(|&i| start[i]).collect();
    let mut out = levenberg_marquardt(&residual, Some(&jacobian), &q0, model.omega.len(), &opts);
    out.params = full(&out.params);
    out
}

/// Nonlinear least-squares fit of `binned` to `n_lorentzians` Lorentzians,
/// the anchored `1/ω^a` term and optionally a white floor.
///
/// Multi-starts over `τ ∈ {0.1, 1, 10, 100, 1000} ns` (pairs for two
/// Lorentzians). Components whose `ωτ` stays below 0.3 over the data are
/// flagged degenerate and given a profile-likelihood upper bound on `τ`.
pub fn fit_noise_model(
    binned: &BinnedSpectrum,
    dq_anchor: (f64, f64),
    n_lorentzians: usize,
    white: bool,
) -> Result<NoiseFitResult> {
    let (s_dq, omega_dq) = dq_anchor;
    if !(1..=2).contains(&n_lorentzians) {
        return Err(Error::invalid("n_lorentzians must be 1 or 2"));
    }
    if !(s_dq >= 0.0 && s_dq.is_finite() && omega_dq > 0.0 && omega_dq.is_finite()) {
        return Err(Error::invalid("DQ anchor needs s_dq >= 0 and omega_dq > 0"));
    }
    let data: Vec<(f64, f64)> = binned
        .bins
        .iter()
        .filter(|b| b.mean > 0.0 && b.omega > 0.0)
        .map(|b| (b.omega, b.mean))
        .collect();
    let n_params = 2 * n_lorentzians + 1 + usize::from(white);
    if data.len() < n_params + 1 {
        return Err(Error::data(format!(
            "noise-model fit needs >= {} positive bins, got {}",
            n_params + 1,
            data.len()
        )));
    }
    let omega: Vec<f64> = data.iter().map(|d| d.0).collect();
    let ln_s: Vec<f64> = data.iter().map(|d| d.1.ln()).collect();
    let model = Model {
        omega: &omega,
        ln_s: &ln_s,
        n_l: n_lorentzians,
        white,
        s_dq,
        omega_dq,
    };

    let mut sorted = data.iter().map(|d| d.1).collect::<Vec<_>>();
    sorted.sort_by(f64::total_cmp);
    let s_med = sorted[sorted.len() / 2];
    let s_min = sorted[0];
    let w_med = {
        let mut w = omega.clone();
        w.sort_by(f64::total_cmp);
        w[w.len() / 2]
    };

    let mut lower = Vec::with_capacity(n_params);
    let mut upper = Vec::with_capacity(n_params);
    for _ in 0..n_lorentzians {
        lower.extend([(1e-12 * (PI * s_med / 1e-12).sqrt()).ln(), (1e-13f64).ln()]);
        upper.extend([(1e13f64).ln(), (1e-2f64).ln()]);
    }
    lower.push(EXPONENT_BOUNDS.0);
    upper.push(EXPONENT_BOUNDS.1);
    if white {
        lower.push((1e-12 * s_med).ln());
        upper.push((1e3 * sorted[sorted.len() - 1]).ln());
    }
    let bounds = (lower, upper);

    let starts: Vec<Vec<f64>> = if n_lorentzians == 1 {
        TAU_STARTS.iter().map(|&t| vec![t]).collect()
    } else {
        let mut v = Vec::new();
        for (i, &t1) in TAU_STARTS.iter().enumerate() {
            for &t2 in &TAU_STARTS[..i] {
                v.push(vec![t1, t2]);
            }
        }
        v
    };

    let mut best: Option<LmOutcome> = None;
    for taus in &starts {
        let mut p0 = Vec::with_capacity(n_params);
        for &tau in taus {
            let share = s_med / n_lorentzians as f64;
            let d2 = PI * share * (1.0 + (w_med * tau).powi(2)) / tau;
            p0.extend([0.5 * d2.ln(), tau.ln()]);
        }
        p0.push(1.5);
        if white {
            p0.push((0.5 * s_min).ln());
        }
        let out = fit_subset(&model, &p0, &[], &bounds);
        if out.ssr.is_finite() && best.as_ref().is_none_or(|b| out.ssr < b.ssr) {
            best = Some(out);
        }
    }
    let best = best.ok_or_else(|| Error::Fit("noise-model fit failed from every start".into()))?;

    let mean_ln = ln_s.iter().sum::<f64>() / ln_s.len() as f64;
    let sst: f64 = ln_s.iter().map(|x| (x - mean_ln).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - best.ssr / sst } else if best.ssr < 1e-20 { 1.0 } else { 0.0 };
    if r_squared < 0.0 {
        return Err(Error::Fit(format!(
            "noise model fits worse than the mean (r^2 = {r_squared:.3})"
        )));
    }

    let w_max = omega.iter().copied().fold(0.0, f64::max);
    let dof = (omega.len() - n_params).max(1) as f64;
    let sigma2 = (best.ssr / dof).max(1e-4);
    let threshold = best.ssr + 4.0 * sigma2;
    let mut components = Vec::with_capacity(n_lorentzians);
    for k in 0..n_lorentzians {
        let delta = best.params[2 * k].exp();
        let tau = best.params[2 * k + 1].exp();
        let degenerate = w_max * tau < DEGENERATE_OMEGA_TAU;
        let tau_upper_bound = if degenerate {
            profile_upper_bound(&model, &best.params, 2 * k + 1, threshold, &bounds)
        } else {
            None
        };
        components.push(LorentzianEstimate {
            delta,
            tau_c: tau,
            delta_sq_tau: delta * delta * tau,
            degenerate,
            tau_upper_bound,
        });
    }
    components.sort_by(|a, b| b.tau_c.total_cmp(&a.tau_c));

    let a = best.params[2 * n_lorentzians];
    let one_over_f = OneOverFComponent::anchored(s_dq, omega_dq, a)?;
    let white_floor = white.then(|| best.params[2 * n_lorentzians + 1].exp());
    let spectrum = NoiseSpectrum {
        lorentzians: components
            .iter()
            .map(|c| LorentzianComponent {
                delta: c.delta,
                tau_c: c.tau_c,
            })
            .collect(),
        one_over_f: Some(one_over_f),
        white_floor: white_floor.unwrap_or(0.0),
    };
    Ok(NoiseFitResult {
        spectrum,
        components,
        exponent_a: a,
        delta_e: one_over_f.delta_e,
        s_dq,
        omega_dq,
        white_floor,
        r_squared,
        ssr: best.ssr,
        n_bins: omega.len(),
    })
}

/// Walks `ln τ` upward in steps of ln 1.25 with the other parameters
/// refitted, until the residual sum exceeds `threshold`. Returns the
/// crossing (log-interpolated), or `None` if it is not reached within a
/// factor 10⁴.
fn profile_upper_bound(
    model: &Model<'_>,
    best: &[f64],
    tau_index: usize,
    threshold: f64,
    bounds: &(Vec<f64>, Vec<f64>),
) -> Option<f64> {
    let step = 1.25f64.ln();
    let mut start = best.to_vec();
    let mut prev = (best[tau_index], best_ssr(model, best));
    for j in 1..=42 {
        let ln_tau = best[tau_index] + step * j as f64;
        if ln_tau > bounds.1[tau_index] {
            break;
        }
        let out = fit_subset(model, &start, &[(tau_index, ln_tau)], bounds);
        if out.ssr > threshold {
            let frac = ((threshold - prev.1) / (out.ssr - prev.1)).clamp(0.0, 1.0);
            return Some((prev.0 + frac * (ln_tau - prev.0)).exp());
        }
        prev = (ln_tau, out.ssr);
        start = out.params;
    }
    None
}

fn best_ssr(model: &Model<'_>, p: &[f64]) -> f64 {
    model
        .omega
        .iter()
        .zip(model.ln_s)
        .map(|(&w, &ls)| (model.eval(p, w, None).ln() - ls).powi(2))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::SpectrumBin;
    use crate::spectra::reference;
    use approx::assert_relative_eq;

    fn bins_from(s: &NoiseSpectrum, lo_hz: f64, hi_hz: f64, n: usize) -> BinnedSpectrum {
        let bins = (0..n)
            .map(|i| {
                let f = lo_hz * (hi_hz / lo_hz).powf(i as f64 / (n - 1) as f64);
                let w = 2.0 * PI * f;
                SpectrumBin {
                    omega: w,
                    mean: s.density(w),
                    stderr: 0.0,
                    count: 1,
                }
            })
            .collect();
        BinnedSpectrum {
            bins,
            n_bins: n,
            statistic: "arithmetic-mean".into(),
        }
    }

    #[test]
    fn recovers_core_shell_generator() {
        let truth = reference::core_shell();
        let b = bins_from(&truth, 0.2e6, 300e6, 20);
        let fit = fit_noise_model(&b, (reference::S_DQ, reference::omega_dq()), 2, false).unwrap();
        assert!(fit.r_squared > 0.999);
        assert_relative_eq!(fit.exponent_a, 1.6, max_relative = 0.05);
        let slow = fit.components[0];
        assert_relative_eq!(slow.tau_c, 40e-9, max_relative = 0.05);
        assert_relative_eq!(slow.delta, 2.9e6, max_relative = 0.05);
        let fast = fit.components[1];
        assert_relative_eq!(fast.tau_c, 1e-9, max_relative = 0.05);
        assert_relative_eq!(fast.delta, 1.3e7, max_relative = 0.05);
    }

    #[test]
    fn anchor_identity_is_exact() {
        let truth = reference::core_shell();
        let b = bins_from(&truth, 1e6, 30e6, 14);
        let fit = fit_noise_model(&b, (reference::S_DQ, reference::omega_dq()), 2, false).unwrap();
        assert_eq!(fit.delta_e, reference::S_DQ * reference::omega_dq().powf(fit.exponent_a));
    }

    #[test]
    fn white_bins_give_white_floor() {
        let b = bins_from(&NoiseSpectrum::white(3e4), 1e6, 30e6, 14);
        let fit = fit_noise_model(&b, (0.0, reference::omega_dq()), 1, true).unwrap();
        assert_relative_eq!(fit.white_floor.unwrap(), 3e4, max_relative = 1e-4);
        let w = 2.0 * PI * 5e6;
        let lorentz = fit.spectrum.lorentzians[0].density(w);
        assert!(lorentz < 1e-4 * 3e4, "{lorentz}");
    }

    #[test]
    fn fast_bath_is_reported_as_upper_bound() {
        let truth = NoiseSpectrum::lorentzian(2.4e7, 0.5e-9).with_one_over_f(0.0, 1.5);
        let b = bins_from(&truth, 2e6, 25e6, 14);
        let fit = fit_noise_model(&b, (1e-6, reference::omega_dq()), 1, false).unwrap();
        let c = fit.components[0];
        assert!(c.degenerate);
        assert_relative_eq!(c.delta_sq_tau, 2.4e7f64.powi(2) * 0.5e-9, max_relative = 0.02);
        let ub = c.tau_upper_bound.expect("bounded");
        assert!((0.5e-9..=1e-9).contains(&ub), "upper bound {ub:e}");
    }

    #[test]
    fn too_few_bins() {
        let b = bins_from(&reference::bare(), 1e6, 30e6, 4);
        assert!(fit_noise_model(&b, (reference::S_DQ, reference::omega_dq()), 2, false).is_err());
    }
}

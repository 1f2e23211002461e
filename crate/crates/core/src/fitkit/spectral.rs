//! Photoluminescence charge-state unmixing and DEER signal arithmetic.

use serde::{Deserialize, Serialize};

use super::expfit::{fit_exponential, ExpFit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnmixResult {
    /// Weight `a` of the NV⁰ reference, clipped to `[0, 1]`.
    pub nv0_fraction: f64,
    /// `1 − a`.
    pub nvm_fraction: f64,
    /// Unclipped projection.
    pub raw: f64,
    /// RMS residual of the unit-sum spectra.
    pub residual_rms: f64,
}

fn unit_sum(v: &[f64], what: &str) -> Result<Vec<f64>> {
    let s: f64 = v.iter().sum();
    if !(s.is_finite() && s != 0.0) {
        return Err(Error::data(format!("{what} spectrum has zero or non-finite sum")));
    }
    Ok(v.iter().map(|x| x / s).collect())
}

/// Least-squares `a` in `pl = a·pl⁰ + (1 − a)·pl⁻` on a common grid, with
/// each spectrum first normalized to unit sum.
pub fn unmix_pl(measured: &[f64], ref_nv0: &[f64], ref_nvm: &[f64]) -> Result<UnmixResult> {
    if measured.is_empty() || measured.len() != ref_nv0.len() || measured.len() != ref_nvm.len() {
        return Err(Error::data("spectra must share a nonempty common grid"));
    }
    let m = unit_sum(measured, "measured")?;
    let p0 = unit_sum(ref_nv0, "NV0 reference")?;
    let pm = unit_sum(ref_nvm, "NV- reference")?;
    let d: Vec<f64> = p0.iter().zip(&pm).map(|(a, b)| a - b).collect();
    let dd: f64 = d.iter().map(|x| x * x).sum();
    let scale: f64 = p0.iter().chain(&pm).map(|x| x * x).sum::<f64>();
    if dd <= 1e-24 * scale {
        return Err(Error::Indeterminate("reference spectra are identical".into()));
    }
    let raw = m.iter().zip(&pm).zip(&d).map(|((y, r), dk)| (y - r) * dk).sum::<f64>() / dd;
    let a = raw.clamp(0.0, 1.0);
    let rss: f64 = m
        .iter()
        .zip(&p0)
        .zip(&pm)
        .map(|((y, x0), xm)| (y - a * x0 - (1.0 - a) * xm).powi(2))
        .sum();
    Ok(UnmixResult {
        nv0_fraction: a,
        nvm_fraction: 1.0 - a,
        raw,
        residual_rms: (rss / m.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeerSignals {
    pub s_d: f64,
    pub s_e: f64,
    pub s_fid: f64,
}

/// `S_D = (F₁−F₂)/(F₁+F₂)`, `S_E = (F₃−F₄)/(F₃+F₄)`, `S_FID = S_D/S_E`.
pub fn deer_signals(f1: f64, f2: f64, f3: f64, f4: f64) -> Result<DeerSignals> {
    if !(f1 + f2 > 0.0) || !(f3 + f4 > 0.0) {
        return Err(Error::invalid("photon-count pairs must have positive sums"));
    }
    let s_d = (f1 - f2) / (f1 + f2);
    let s_e = (f3 - f4) / (f3 + f4);
    if s_e == 0.0 {
        return Err(Error::Domain(format!(
            "echo contrast S_E is zero (F3 = F4 = {f3}); S_FID undefined"
        )));
    }
    Ok(DeerSignals {
        s_d,
        s_e,
        s_fid: s_d / s_e,
    })
}

/// `S_FID(τ)` series from per-delay photon counts `(τ, F₁, F₂, F₃, F₄)`,
/// fitted as a single exponential. The returned `rate` is `1/T_FID`.
pub fn fit_deer_fid(rows: &[(f64, f64, f64, f64, f64)]) -> Result<(Vec<(f64, f64)>, ExpFit)> {
    let series = rows
        .iter()
        .map(|&(t, f1, f2, f3, f4)| Ok((t, deer_signals(f1, f2, f3, f4)?.s_fid)))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_exponential(&series)?;
    Ok((series, fit))
}

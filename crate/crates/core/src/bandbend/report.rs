//! Depletion and stability summaries of a solved profile.

use serde::{Deserialize, Serialize};

use super::poisson::{BandProfile, DefectProfile};
use super::DefectKind;
use crate::error::{Error, Result};

/// Neutral density, as a fraction of bulk, that marks the depletion edge.
pub const DEFAULT_DEPLETION_THRESHOLD: f64 = 0.5;

/// Thresholds at which the width is also reported.
const SENSITIVITY_THRESHOLDS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdWidth {
    pub threshold: f64,
    pub width_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepletionReport {
    pub defect: String,
    pub threshold: f64,
    /// Distance from the surface at which the neutral density recovers to
    /// `threshold` times its bulk value, nm.
    pub width_nm: f64,
    /// `1 − N⁰/(n⁰_bulk V)` for the whole particle.
    pub reduction: f64,
    pub sensitivity: Vec<ThresholdWidth>,
}

impl DepletionReport {
    fn none(defect: &str, threshold: f64) -> Self {
        Self {
            defect: defect.into(),
            threshold,
            width_nm: 0.0,
            reduction: 0.0,
            sensitivity: SENSITIVITY_THRESHOLDS
                .iter()
                .map(|&t| ThresholdWidth {
                    threshold: t,
                    width_nm: 0.0,
                })
                .collect(),
        }
    }
}

/// `∫₀^R f r² dr` on the profile grid (Simpson).
fn radial_integral(r: &[f64], f: &[f64]) -> f64 {
    let h = r[1] - r[0];
    let y: Vec<f64> = r.iter().zip(f).map(|(r, f)| f * r * r).collect();
    let n = y.len() - 1;
    let even = n - n % 2;
    let mut s = y[0] + y[even];
    for (i, v) in y.iter().enumerate().take(even).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = s * h / 3.0;
    if even < n {
        total += 0.5 * h * (y[n - 1] + y[n]);
    }
    total
}

fn depletion_width(profile: &BandProfile, d: &DefectProfile, threshold: f64) -> f64 {
    let level = threshold * d.bulk_neutral;
    let r = &profile.r;
    let n = &d.neutral;
    let m = n.len() - 1;
    if n[m] >= level {
        return 0.0;
    }
    match (0..m).rev().find(|&i| n[i] >= level) {
        Some(i) => {
            let f = (n[i] - level) / (n[i] - n[i + 1]);
            let edge = r[i] + f * (r[i + 1] - r[i]);
            r[m] - edge
        }
        None => r[m],
    }
}

/// Depletion width and neutral-count reduction of the donor `name`.
///
/// A profile in which the neutral density never drops below its bulk value
/// (flat or downward bending) reports zero width and zero reduction.
pub fn p1_depletion_report(profile: &BandProfile, name: &str, threshold: f64) -> Result<DepletionReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("depletion threshold must be in (0, 1), got {threshold}")));
    }
    let d = profile
        .defect(name)
        .ok_or_else(|| Error::invalid(format!("profile has no defect named '{name}'")))?;
    if d.kind != DefectKind::Donor {
        return Err(Error::invalid(format!("'{name}' is not a donor level")));
    }
    let tol = 1e-9 * d.bulk_neutral;
    if d.bulk_neutral <= 0.0 || d.neutral.iter().all(|&n| n >= d.bulk_neutral - tol) {
        return Ok(DepletionReport::none(name, threshold));
    }
    let radius = *profile.r.last().expect("non-empty grid");
    let deficit: Vec<f64> = d.neutral.iter().map(|n| d.bulk_neutral - n).collect();
    let reduction = 3.0 * radial_integral(&profile.r, &deficit) / (d.bulk_neutral * radius.powi(3));
    Ok(DepletionReport {
        defect: name.into(),
        threshold,
        width_nm: depletion_width(profile, d, threshold),
        reduction,
        sensitivity: SENSITIVITY_THRESHOLDS
            .iter()
            .map(|&t| ThresholdWidth {
                threshold: t,
                width_nm: depletion_width(profile, d, t),
            })
            .collect(),
    })
}

/// Relative change of the NV⁻ count against flat bands.
pub fn nv_stability_report(profile: &BandProfile) -> Result<f64> {
    let d = profile
        .defects
        .iter()
        .find(|d| d.name == "NV" && d.kind == DefectKind::Acceptor)
        .ok_or_else(|| Error::invalid("profile has no NV acceptor level"))?;
    if d.bulk_charged <= 0.0 {
        return Err(Error::Domain("NV⁻ bulk density is zero; relative change undefined".into()));
    }
    let radius = *profile.r.last().expect("non-empty grid");
    let excess: Vec<f64> = d.charged.iter().map(|q| q - d.bulk_charged).collect();
    Ok(3.0 * radial_integral(&profile.r, &excess) / (d.bulk_charged * radius.powi(3)))
}

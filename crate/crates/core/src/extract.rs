//! Noise spectroscopy: coherence traces to spectral density points, log
//! binning, and the combined DQ/CPMG/SQ overview.
//!
//! Each retained sample `(t, c)` of an `N`-pulse CPMG trace gives one point
//! `S(πN/t) = πχ/(κt)` with `χ = −ln c`. The `κ` divisor inverts the
//! calibrated forward model `χ ≈ κ·tS/π` of [`crate::filterfn`], so a trace
//! generated from white noise by the exact filter integral comes back as
//! exactly that white level.

use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterfn::kappa;
use crate::trace::{fmt, write_comments, CoherenceTrace};

/// Default pulse-count cutoff; traces with `N ≤ 64` are skipped.
pub const DEFAULT_MIN_PULSES: u32 = 64;
pub const DEFAULT_BINS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PointSource {
    Cpmg,
    Dq,
    Sq,
}

impl PointSource {
    pub fn label(&self) -> &'static str {
        match self {
            PointSource::Cpmg => "CPMG",
            PointSource::Dq => "DQ",
            PointSource::Sq => "SQ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub omega0: f64,
    pub s_value: f64,
    pub source: PointSource,
    /// Inverse variance, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

/// How raw readout values map onto coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Normalization {
    /// Rescale so the trace minimum maps to 0 and its maximum to 1.
    #[default]
    MinMax,
    /// `c = (raw − baseline)/amplitude`.
    Explicit { baseline: f64, amplitude: f64 },
    /// Values already are coherences.
    Identity,
}

/// Maps raw values to coherence and discards points outside `[0, 1]`.
/// Points at exactly 0 or 1 are kept (they are skipped later wherever a
/// logarithm is taken).
pub fn normalize_trace(raw: &CoherenceTrace, norm: &Normalization) -> Result<CoherenceTrace> {
    if raw.is_empty() {
        return Err(Error::data("cannot normalize an empty trace"));
    }
    let (baseline, amplitude) = match *norm {
        Normalization::Identity => (0.0, 1.0),
        Normalization::Explicit {
            baseline,
            amplitude,
        } => (baseline, amplitude),
        Normalization::MinMax => {
            let lo = raw.samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
            let hi = raw.samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi - lo)
        }
    };
    if !(amplitude.is_finite() && amplitude != 0.0) {
        return Err(Error::data("normalization amplitude is zero or not finite"));
    }
    let mut samples = Vec::with_capacity(raw.len());
    let mut stderr = raw.stderr.as_ref().map(|_| Vec::with_capacity(raw.len()));
    for (i, &(t, v)) in raw.samples.iter().enumerate() {
        let c = if matches!(norm, Normalization::Identity) {
            v
        } else {
            (v - baseline) / amplitude
        };
        if (0.0..=1.0).contains(&c) {
            samples.push((t, c));
            if let (Some(out), Some(src)) = (stderr.as_mut(), raw.stderr.as_ref()) {
                out.push(src[i] / amplitude.abs());
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::data("all points fell outside [0, 1] after normalization"));
    }
    Ok(CoherenceTrace {
        n_pulses: raw.n_pulses,
        t_pi: raw.t_pi,
        samples,
        stderr,
        source: raw.source.clone(),
    })
}

/// Spectral points from every sample with `0 < c < 1` of every trace with
/// `N > min_pulses`, sorted by frequency.
pub fn extract_spectrum(traces: &[CoherenceTrace], min_pulses: u32) -> Result<Vec<SpectrumPoint>> {
    extract_spectrum_with(traces, min_pulses, kappa())
}

/// [`extract_spectrum`] with an explicit calibration constant `k`, so
/// `S = πχ/(k t)`.
pub fn extract_spectrum_with(traces: &[CoherenceTrace], min_pulses: u32, k: f64) -> Result<Vec<SpectrumPoint>> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid(format!("calibration constant must be > 0, got {k}")));
    }
    let mut points = Vec::new();
    for tr in traces {
        if tr.n_pulses <= min_pulses {
            warn!(
                "skipping trace with N = {} (<= {min_pulses}) for spectrum extraction",
                tr.n_pulses
            );
            continue;
        }
        for &(t, c) in &tr.samples {
            if c > 0.0 && c < 1.0 && t > 0.0 {
                let chi = -c.ln();
                points.push(SpectrumPoint {
                    omega0: PI * tr.n_pulses as f64 / t,
                    s_value: PI * chi / (k * t),
                    source: PointSource::Cpmg,
                    weight: None,
                });
            }
        }
    }
    if points.is_empty() {
        return Err(Error::data(format!(
            "no CPMG points retained (need traces with N > {min_pulses} and 0 < c < 1)"
        )));
    }
    points.sort_by(|a, b| {
        a.omega0
            .total_cmp(&b.omega0)
            .then(a.s_value.total_cmp(&b.s_value))
    });
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBin {
    /// Geometric mean of the member frequencies.
    pub omega: f64,
    /// Arithmetic mean of the member densities.
    pub mean: f64,
    /// Standard error of the mean (0 for single-point bins).
    pub stderr: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSpectrum {
    pub bins: Vec<SpectrumBin>,
    pub n_bins: usize,
    pub statistic: String,
}

impl BinnedSpectrum {
    /// Log-log linear interpolation of the bin means at `omega`; `None`
    /// outside the span of bin centres.
    pub fn interpolate(&self, omega: f64) -> Option<f64> {
        let b = &self.bins;
        if b.is_empty() || !(omega > 0.0) {
            return None;
        }
        if b.len() == 1 {
            return (omega == b[0].omega).then_some(b[0].mean);
        }
        let i = b.windows(2).position(|w| w[0].omega <= omega && omega <= w[1].omega)?;
        let (l, r) = (&b[i], &b[i + 1]);
        if !(l.mean > 0.0 && r.mean > 0.0) {
            return None;
        }
        let f = (omega / l.omega).ln() / (r.omega / l.omega).ln();
        Some((l.mean.ln() + f * (r.mean / l.mean).ln()).exp())
    }
}

/// Groups points into `n_bins` geometric bins spanning their frequency
/// range; empty bins are dropped.
pub fn log_bin(points: &[SpectrumPoint], n_bins: usize) -> Result<BinnedSpectrum> {
    if points.is_empty() {
        return Err(Error::data("no spectrum points to bin"));
    }
    if n_bins == 0 {
        return Err(Error::invalid("n_bins must be >= 1"));
    }
    if points.iter().any(|p| !(p.omega0 > 0.0 && p.omega0.is_finite())) {
        return Err(Error::data("spectrum points need omega > 0"));
    }
    let lo = points.iter().map(|p| p.omega0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.omega0).fold(0.0, f64::max);
    let span = (hi / lo).ln();
    let mut members: Vec<Vec<&SpectrumPoint>> = vec![Vec::new(); n_bins];
    for p in points {
        let i = if span > 0.0 {
            ((n_bins as f64 * (p.omega0 / lo).ln() / span) as usize).min(n_bins - 1)
        } else {
            0
        };
        members[i].push(p);
    }
    let bins = members
        .iter()
        .filter(|m| !m.is_empty())
        .map(|m| {
            let n = m.len() as f64;
            let mean = m.iter().map(|p| p.s_value).sum::<f64>() / n;
            let omega = (m.iter().map(|p| p.omega0.ln()).sum::<f64>() / n).exp();
            let stderr = if m.len() > 1 {
                let var = m.iter().map(|p| (p.s_value - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            SpectrumBin {
                omega,
                mean,
                stderr,
                count: m.len(),
            }
        })
        .collect();
    Ok(BinnedSpectrum {
        bins,
        n_bins,
        statistic: "arithmetic-mean".into(),
    })
}

/// Binned CPMG points followed by the DQ point `(ω_dq, γ)` and the SQ point
/// `(ω_sq, Ω)`.
pub fn assemble_overview(
    binned: &BinnedSpectrum,
    dq: (f64, f64),
    sq: (f64, f64),
) -> Result<Vec<SpectrumPoint>> {
    let (gamma, omega_dq) = dq;
    let (omega_rate, omega_sq) = sq;
    if !(gamma >= 0.0 && omega_rate >= 0.0) {
        return Err(Error::invalid("relaxation rates must be >= 0"));
    }
    let mut out: Vec<SpectrumPoint> = binned
        .bins
        .iter()
        .map(|b| SpectrumPoint {
            omega0: b.omega,
            s_value: b.mean,
            source: PointSource::Cpmg,
            weight: (b.stderr > 0.0).then(|| 1.0 / (b.stderr * b.stderr)),
        })
        .collect();
    out.push(SpectrumPoint {
        omega0: omega_dq,
        s_value: gamma,
        source: PointSource::Dq,
        weight: None,
    });
    out.push(SpectrumPoint {
        omega0: omega_sq,
        s_value: omega_rate,
        source: PointSource::Sq,
        weight: None,
    });
    Ok(out)
}

/// Writes `omega_rad_s,S_rad_s,stderr,count,source`. Bins carry their
/// statistics; the extra points (DQ/SQ) have an empty stderr and count 1.
pub fn write_spectrum_csv<W: Write>(
    mut out: W,
    binned: &BinnedSpectrum,
    extra: &[SpectrumPoint],
    comments: &[String],
) -> Result<()> {
    write_comments(&mut out, comments)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega_rad_s", "S_rad_s", "stderr", "count", "source"])?;
    for b in &binned.bins {
        w.write_record([fmt(b.omega), fmt(b.mean), fmt(b.stderr), b.count.to_string(), "CPMG".into()])?;
    }
    for p in extra {
        let se = p.weight.map(|wt| fmt(1.0 / wt.sqrt())).unwrap_or_default();
        w.write_record([fmt(p.omega0), fmt(p.s_value), se, "1".into(), p.source.label().into()])?;
    }
    w.flush()?;
    Ok(())
}

//! Coherence under Gaussian (sum-of-OU) dephasing noise with CPMG control.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ou::{OUParams, OuStep};
use super::shot_rng;
use crate::error::{Error, Result};
use crate::filterfn::DecouplingSequence;
use crate::spectra::{LorentzianComponent, NoiseSpectrum};
use crate::trace::CoherenceTrace;

/// What the qubit sees while a π pulse is being applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseDephasingMode {
    /// Pulses are instantaneous; `t_π` is ignored.
    ZeroWidth,
    /// Pulses last `t_π`; the bath keeps evolving but no phase is acquired.
    FrozenDuringPulse,
    /// Pulses last `t_π` and the toggling sign rotates as `cos(πu/t_π)`, so
    /// noise during the pulse contributes to the phase.
    AccumulateDuringPulse,
}

/// One OU contribution with rms `sigma` and correlation time `tau_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuComponent {
    pub sigma: f64,
    pub tau_c: f64,
}

/// A stationary Gaussian bath: independent OU processes plus white noise of
/// one-sided level `white_floor`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GaussianBath {
    pub components: Vec<OuComponent>,
    pub white_floor: f64,
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

impl GaussianBath {
    pub fn from_ou(params: &OUParams) -> Self {
        Self {
            components: vec![OuComponent {
                sigma: params.delta,
                tau_c: params.tau_c,
            }],
            white_floor: 0.0,
        }
    }

    /// Realizes `spectrum`. A `1/ω^a` term is replaced by a bank of OU
    /// processes with correlation times log-spaced over
    /// `[1/omega_hi, 1/omega_lo]`, `per_decade` per decade, whose summed
    /// Lorentzians reproduce `Δ_e/ω^a` inside that band.
    pub fn from_spectrum(
        spectrum: &NoiseSpectrum,
        omega_lo: f64,
        omega_hi: f64,
        per_decade: usize,
    ) -> Result<Self> {
        spectrum.validate()?;
        let mut components: Vec<OuComponent> = spectrum
            .lorentzians
            .iter()
            .filter(|l| l.delta > 0.0)
            .map(|l| OuComponent {
                sigma: l.delta / SQRT_2PI,
                tau_c: l.tau_c,
            })
            .collect();
        if let Some(f) = spectrum.one_over_f.filter(|f| f.delta_e > 0.0) {
            if !(omega_lo > 0.0 && omega_hi > omega_lo) {
                return Err(Error::invalid("1/f bank needs 0 < omega_lo < omega_hi"));
            }
            if per_decade < 2 {
                return Err(Error::invalid("1/f bank needs at least 2 components per decade"));
            }
            if !(f.exponent_a > 0.0 && f.exponent_a < 2.0) {
                return Err(Error::invalid(format!(
                    "OU bank represents 0 < a < 2 only, got a = {}",
                    f.exponent_a
                )));
            }
            let a = f.exponent_a;
            let h = std::f64::consts::LN_10 / per_decade as f64;
            let count = ((omega_hi / omega_lo).ln() / h).ceil() as usize;
            let weight = 2.0 * f.delta_e * (PI * a / 2.0).sin() * h;
            let mut push = |delta_sq: f64, tau: f64| {
                components.push(OuComponent {
                    sigma: (delta_sq / (2.0 * PI)).sqrt(),
                    tau_c: tau,
                })
            };
            for k in 0..count {
                let tau = (1.0 / omega_hi) * ((k as f64 + 0.5) * h).exp();
                push(weight * tau.powf(a - 1.0), tau);
            }
            // End caps stand in for the correlation times cut off on either
            // side: each matches the asymptote of the missing continuum.
            let c = weight / h;
            let tau_min = 1.0 / omega_hi;
            let tau_max = tau_min * (count as f64 * h).exp();
            push(c * tau_min.powf(a - 1.0) / a, tau_min);
            push(c * tau_max.powf(a - 1.0) / (2.0 - a), tau_max);
        }
        Ok(Self {
            components,
            white_floor: spectrum.white_floor,
        })
    }

    /// The noise spectrum this bath actually realizes (all Lorentzian).
    pub fn spectrum(&self) -> NoiseSpectrum {
        NoiseSpectrum {
            lorentzians: self
                .components
                .iter()
                .map(|c| LorentzianComponent {
                    delta: c.sigma * SQRT_2PI,
                    tau_c: c.tau_c,
                })
                .collect(),
            one_over_f: None,
            white_floor: self.white_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            if !(c.sigma.is_finite() && c.sigma >= 0.0 && c.tau_c.is_finite() && c.tau_c > 0.0) {
                return Err(Error::invalid(format!("bad OU component {c:?}")));
            }
        }
        if !(self.white_floor.is_finite() && self.white_floor >= 0.0) {
            return Err(Error::invalid("white floor must be >= 0"));
        }
        Ok(())
    }
}

/// Mean coherence at one time with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherencePoint {
    pub t: f64,
    pub c: f64,
    pub stderr: f64,
}

/// Sub-steps used to resolve the toggling sign inside a finite pulse.
const PULSE_SUBSTEPS: usize = 16;

/// One piece of the control timeline: duration, the toggling weight applied
/// to the bath integral, and whether the piece contributes phase at all.
#[derive(Debug, Clone, Copy)]
struct Piece {
    len: f64,
    weight: f64,
    kind: usize,
}

/// The timeline as pieces plus the distinct step lengths they use.
fn timeline(seq: &DecouplingSequence, mode: PulseDephasingMode) -> (Vec<Piece>, Vec<f64>) {
    let segments = seq.free_segments();
    let t_pi = match mode {
        PulseDephasingMode::ZeroWidth => 0.0,
        _ => seq.t_pi,
    };
    let mut lengths: Vec<f64> = Vec::new();
    let mut kind_of = |len: f64| -> usize {
        if let Some(i) = lengths.iter().position(|&l| l == len) {
            i
        } else {
            lengths.push(len);
            lengths.len() - 1
        }
    };
    let mut pieces = Vec::new();
    let mut sign = 1.0;
    for (i, &len) in segments.iter().enumerate() {
        pieces.push(Piece {
            len,
            weight: sign,
            kind: kind_of(len),
        });
        if i + 1 == segments.len() {
            break;
        }
        if t_pi > 0.0 {
            match mode {
                PulseDephasingMode::FrozenDuringPulse => pieces.push(Piece {
                    len: t_pi,
                    weight: 0.0,
                    kind: kind_of(t_pi),
                }),
                PulseDephasingMode::AccumulateDuringPulse => {
                    let h = t_pi / PULSE_SUBSTEPS as f64;
                    let k = kind_of(h);
                    for j in 0..PULSE_SUBSTEPS {
                        let u = (j as f64 + 0.5) / PULSE_SUBSTEPS as f64;
                        pieces.push(Piece {
                            len: h,
                            weight: sign * (PI * u).cos(),
                            kind: k,
                        });
                    }
                }
                PulseDephasingMode::ZeroWidth => {}
            }
        }
        sign = -sign;
    }
    (pieces, lengths)
}

/// Accumulated phase for one shot.
fn shot_phase<R: Rng>(
    bath: &GaussianBath,
    steps: &[Vec<OuStep>],
    pieces: &[Piece],
    rng: &mut R,
) -> f64 {
    let mut phi = 0.0;
    for (c, comp) in bath.components.iter().enumerate() {
        if comp.sigma == 0.0 {
            continue;
        }
        let table = &steps[c];
        let mut b: f64 = rng.sample(StandardNormal);
        let mut acc = 0.0;
        for p in pieces {
            if p.weight == 0.0 {
                table[p.kind].advance_state(&mut b, rng);
            } else {
                acc += p.weight * table[p.kind].advance(&mut b, rng);
            }
        }
        phi += comp.sigma * acc;
    }
    if bath.white_floor > 0.0 {
        for p in pieces {
            if p.weight != 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                phi += p.weight * (bath.white_floor * p.len).sqrt() * z;
            }
        }
    }
    phi
}

/// `⟨cos φ⟩` over `n_shots` for the sequence, with shots drawn from streams
/// `stream_base + shot`.
fn run_point(
    bath: &GaussianBath,
    seq: &DecouplingSequence,
    mode: PulseDephasingMode,
    n_shots: usize,
    seed: u64,
    stream_base: u64,
) -> CoherencePoint {
    let (pieces, lengths) = timeline(seq, mode);
    let steps: Vec<Vec<OuStep>> = bath
        .components
        .iter()
        .map(|c| lengths.iter().map(|&h| OuStep::new(c.tau_c, h)).collect())
        .collect();
    // Store 1 − cos φ = 2 sin²(φ/2) so weak decay keeps its precision.
    let loss: Vec<f64> = (0..n_shots as u64)
        .into_par_iter()
        .map(|shot| {
            let mut rng = shot_rng(seed, stream_base + shot);
            let phi = shot_phase(bath, &steps, &pieces, &mut rng);
            let s = (0.5 * phi).sin();
            2.0 * s * s
        })
        .collect();
    let n = n_shots as f64;
    let mean = loss.iter().sum::<f64>() / n;
    let var = loss.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0);
    CoherencePoint {
        t: seq.total_time,
        c: 1.0 - mean,
        stderr: (var / n).sqrt(),
    }
}

const MIN_SHOTS: usize = 100;

fn check_shots(n_shots: usize) -> Result<()> {
    if n_shots < MIN_SHOTS {
        return Err(Error::invalid(format!(
            "n_shots must be >= {MIN_SHOTS}, got {n_shots}"
        )));
    }
    Ok(())
}

/// Monte Carlo `⟨cos φ⟩` for a single OU process under `sequence`.
///
/// The phase is `φ = ∫ s(u) b(u) du` with `s` flipping sign at each pulse
/// (spacing `t/N`, half intervals at both ends). Integrals over each free
/// interval are drawn exactly from the joint Gaussian law of `(b, ∫b)`, so
/// `params.dt` only matters for [`super::ou_trajectory`].
pub fn simulate_coherence(
    params: &OUParams,
    sequence: &DecouplingSequence,
    mode: PulseDephasingMode,
    n_shots: usize,
) -> Result<CoherencePoint> {
    params.validate()?;
    simulate_bath_coherence(&GaussianBath::from_ou(params), sequence, mode, n_shots, params.seed)
}

/// Monte Carlo `⟨cos φ⟩` for an arbitrary Gaussian bath.
pub fn simulate_bath_coherence(
    bath: &GaussianBath,
    sequence: &DecouplingSequence,
    mode: PulseDephasingMode,
    n_shots: usize,
    seed: u64,
) -> Result<CoherencePoint> {
    bath.validate()?;
    sequence.validate()?;
    check_shots(n_shots)?;
    Ok(run_point(bath, sequence, mode, n_shots, seed, 0))
}

/// Coherence at each of `times` (independent shots per point) as a trace
/// with standard errors.
pub fn simulate_bath_trace(
    bath: &GaussianBath,
    template: &DecouplingSequence,
    times: &[f64],
    mode: PulseDephasingMode,
    n_shots: usize,
    seed: u64,
) -> Result<CoherenceTrace> {
    bath.validate()?;
    check_shots(n_shots)?;
    if times.is_empty() {
        return Err(Error::invalid("no simulation times given"));
    }
    let mut samples = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let seq = template.at_time(t);
        seq.validate()?;
        let p = run_point(bath, &seq, mode, n_shots, seed, (i as u64) << 32);
        samples.push((t, p.c));
        stderr.push(p.stderr);
    }
    let mut trace = CoherenceTrace::new(template.n_pulses, template.t_pi, samples)?;
    trace.stderr = Some(stderr);
    trace.source = "simulated".into();
    Ok(trace)
}

//! Stretched-exponential decay fits, `c(t) = a·exp(−((t − t₀)/T₂)ⁿ)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use crate::error::{Error, Result};
use crate::trace::CoherenceTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StretchedExpFit {
    pub amplitude: f64,
    pub t2: f64,
    pub stretch: f64,
    /// Fixed offset `N·t_π`.
    pub t0: f64,
    /// `√Σ r²`.
    pub residual_norm: f64,
    pub n_points: usize,
}

impl StretchedExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        stretched(self.amplitude, self.t2, self.stretch, t - self.t0)
    }
}

pub fn stretched(a: f64, t2: f64, n: f64, dt: f64) -> f64 {
    if dt <= 0.0 {
        return a;
    }
    a * (-(dt / t2).powf(n)).exp()
}

pub const STRETCH_STARTS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
const AMPLITUDE_MAX: f64 = 1.5;
const STRETCH_BOUNDS: (f64, f64) = (0.1 + 1e-9, 4.0);
pub const MIN_POINTS: usize = 5;

/// Fits with amplitude free (`fixed_amplitude = None`) or held fixed.
pub(crate) fn fit_stretched_inner(
    trace: &CoherenceTrace,
    fixed_amplitude: Option<f64>,
) -> Result<StretchedExpFit> {
    let t0 = trace.n_pulses as f64 * trace.t_pi;
    let pts: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .filter(|(t, c)| t.is_finite() && c.is_finite())
        .map(|&(t, c)| (t - t0, c))
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(Error::data(format!(
            "stretched-exponential fit needs >= {MIN_POINTS} samples, got {}",
            pts.len()
        )));
    }
    let scale = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    if scale <= 0.0 {
        return Err(Error::data("all samples precede the pulse-time offset"));
    }
    let a_guess = fixed_amplitude.unwrap_or_else(|| {
        pts.iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max)
            .clamp(1e-3, AMPLITUDE_MAX)
    });

    // Parameters: [a, T₂/scale, n] or [T₂/scale, n].
    let free_a = fixed_amplitude.is_none();
    let unpack = move |p: &[f64]| -> (f64, f64, f64) {
        if free_a {
            (p[0], p[1], p[2])
        } else {
            (a_guess, p[0], p[1])
        }
    };
    let xs: Vec<f64> = pts.iter().map(|p| p.0 / scale).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let residual = |p: &[f64], r: &mut [f64]| {
        let (a, s, n) = unpack(p);
        for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
            r[i] = stretched(a, s, n, x) - y;
        }
    };
    let jacobian = |p: &[f64], j: &mut DMatrix<f64>| {
        let (a, s, n) = unpack(p);
        let off = usize::from(free_a);
        for (i, &x) in xs.iter().enumerate() {
            let (da, ds, dn) = if x <= 0.0 {
                (1.0, 0.0, 0.0)
            } else {
                let u = x / s;
                let un = u.powf(n);
                let e = (-un).exp();
                (e, a * e * n * un / s, -a * e * un * u.ln())
            };
            if free_a {
                j[(i, 0)] = da;
            }
            j[(i, off)] = ds;
            j[(i, off + 1)] = dn;
        }
    };

    let mut lower = vec![1e-9, STRETCH_BOUNDS.0];
    let mut upper = vec![1e6, STRETCH_BOUNDS.1];
    if free_a {
        lower.insert(0, 1e-9);
        upper.insert(0, AMPLITUDE_MAX);
    }
    let opts = LmOptions {
        lower: Some(lower),
        upper: Some(upper),
        ..Default::default()
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut diagnostics = Vec::new();
    for &n0 in &STRETCH_STARTS {
        // T₂ guess: median of per-point inversions of the model at n0.
        let mut guesses: Vec<f64> = xs
            .iter()
            .zip(&ys)
            .filter(|(&x, &y)| x > 0.0 && y > 0.0 && y < a_guess)
            .map(|(&x, &y)| x / (-(y / a_guess).ln()).powf(1.0 / n0))
            .filter(|g| g.is_finite() && *g > 0.0)
            .collect();
        guesses.sort_by(f64::total_cmp);
        let s0 = guesses.get(guesses.len() / 2).copied().unwrap_or(1.0);
        let mut p0 = vec![s0, n0];
        if free_a {
            p0.insert(0, a_guess);
        }
        let out = levenberg_marquardt(&residual, Some(&jacobian), &p0, xs.len(), &opts);
        diagnostics.push(format!("n0={n0}: ssr={:.3e} iters={}", out.ssr, out.iterations));
        if out.converged && out.ssr.is_finite() && best.as_ref().is_none_or(|b| out.ssr < b.0) {
            best = Some((out.ssr, out.params));
        }
    }
    let Some((ssr, p)) = best else {
        return Err(Error::Fit(format!(
            "stretched exponential did not converge from any start ({})",
            diagnostics.join("; ")
        )));
    };
    let (a, s, n) = unpack(&p);
    Ok(StretchedExpFit {
        amplitude: a,
        t2: s * scale,
        stretch: n,
        t0,
        residual_norm: ssr.sqrt(),
        n_points: xs.len(),
    })
}

/// Least-squares fit with `t₀ = N·t_π` fixed, started from each of
/// `n ∈ {0.5, 1, 1.5, 2, 3}`; the lowest-residual optimum is returned.
pub fn fit_stretched_exp(trace: &CoherenceTrace) -> Result<StretchedExpFit> {
    fit_stretched_inner(trace, None)
}

/// Joint fit of a pulse-count series with amplitudes forced nonincreasing
/// in `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneAmplitudeFit {
    pub fits: Vec<StretchedExpFit>,
    pub n_pulses: Vec<u32>,
    /// Amplitudes of the unconstrained per-trace fits.
    pub free_amplitudes: Vec<f64>,
    /// True when the constraint changed at least one amplitude.
    pub constraint_active: bool,
    /// Largest increase of the free amplitudes along `N`.
    pub max_violation: f64,
    /// Violation larger than [`MONOTONE_TOLERANCE`]: the data disagree with
    /// the constraint; fits are returned at the boundary.
    pub infeasible: bool,
}

pub const MONOTONE_TOLERANCE: f64 = 0.05;

/// Pool-adjacent-violators projection onto nonincreasing sequences.
pub fn project_nonincreasing(values: &[f64]) -> Vec<f64> {
    // Blocks of (sum, count), merged while the nonincreasing order breaks.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 >= s1 / c1 as f64 {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = (s0 + s1, c0 + c1);
        }
    }
    blocks
        .iter()
        .flat_map(|&(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect()
}

/// Per-trace stretched fits whose amplitudes satisfy `a(N₁) ≥ a(N₂)` for
/// `N₁ < N₂`: free amplitudes are projected onto the constraint and the
/// remaining parameters refitted with the projected amplitudes.
pub fn fit_amplitude_monotone(traces: &[CoherenceTrace]) -> Result<MonotoneAmplitudeFit> {
    if traces.is_empty() {
        return Err(Error::data("no traces to fit"));
    }
    if traces.windows(2).any(|w| w[1].n_pulses < w[0].n_pulses) {
        return Err(Error::invalid("traces must be sorted by pulse count"));
    }
    let free = traces
        .iter()
        .map(fit_stretched_exp)
        .collect::<Result<Vec<_>>>()?;
    let free_amplitudes: Vec<f64> = free.iter().map(|f| f.amplitude).collect();
    let max_violation = free_amplitudes
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let projected = project_nonincreasing(&free_amplitudes);
    let constraint_active = projected
        .iter()
        .zip(&free_amplitudes)
        .any(|(p, f)| (p - f).abs() > 1e-12 * f.abs().max(1.0));
    let fits = if constraint_active {
        traces
            .iter()
            .zip(&projected)
            .zip(free)
            .map(|((tr, &a), f)| {
                if (a - f.amplitude).abs() <= 1e-12 * a.abs().max(1.0) {
                    Ok(f)
                } else {
                    fit_stretched_inner(tr, Some(a))
                }
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        free
    };
    if max_violation > MONOTONE_TOLERANCE {
        log::warn!("amplitudes increase with N by up to {max_violation:.3}; constrained fit at boundary");
    }
    Ok(MonotoneAmplitudeFit {
        fits,
        n_pulses: traces.iter().map(|t| t.n_pulses).collect(),
        free_amplitudes,
        constraint_active,
        max_violation,
        infeasible: max_violation > MONOTONE_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synth(a: f64, t2: f64, n: f64, n_pulses: u32, t_pi: f64, points: usize, t_max: f64) -> CoherenceTrace {
        let t0 = n_pulses as f64 * t_pi;
        let samples = (1..=points)
            .map(|i| {
                let t = t0 + t_max * i as f64 / points as f64;
                (t, stretched(a, t2, n, t - t0))
            })
            .collect();
        CoherenceTrace::new(n_pulses, t_pi, samples).unwrap()
    }

    #[test]
    fn recovers_noiseless_generator() {
        let tr = synth(1.0, 70e-6, 1.5, 64, 2e-8, 50, 200e-6);
        let f = fit_stretched_exp(&tr).unwrap();
        assert_relative_eq!(f.amplitude, 1.0, max_relative = 1e-6);
        assert_relative_eq!(f.t2, 70e-6, max_relative = 1e-6);
        assert_relative_eq!(f.stretch, 1.5, max_relative = 1e-6);
        assert_relative_eq!(f.t0, 64.0 * 2e-8, max_relative = 1e-12);
    }

    #[test]
    fn pure_exponential_has_unit_stretch() {
        let tr = synth(0.8, 1.42e-6, 1.0, 1, 0.0, 30, 5e-6);
        let f = fit_stretched_exp(&tr).unwrap();
        assert_relative_eq!(f.stretch, 1.0, max_relative = 1e-8);
        assert_relative_eq!(f.t2, 1.42e-6, max_relative = 1e-8);
    }

    #[test]
    fn too_few_points() {
        let tr = synth(1.0, 1e-6, 1.0, 1, 0.0, 4, 3e-6);
        assert!(matches!(fit_stretched_exp(&tr), Err(Error::Data(_))));
    }

    #[test]
    fn pava_examples() {
        assert_eq!(project_nonincreasing(&[1.0, 0.9, 0.8]), vec![1.0, 0.9, 0.8]);
        let close = |a: Vec<f64>, b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(project_nonincreasing(&[0.8, 0.9, 0.7]), &[0.85, 0.85, 0.7]));
        assert!(close(project_nonincreasing(&[0.5, 0.6, 0.7]), &[0.6, 0.6, 0.6]));
    }

    #[test]
    fn monotone_recovers_decreasing_amplitudes() {
        let traces: Vec<_> = [(16, 1.0), (64, 0.9), (256, 0.8)]
            .iter()
            .map(|&(n, a)| synth(a, 20e-6 * (n as f64).powf(0.5), 1.3, n, 0.0, 40, 400e-6))
            .collect();
        let fit = fit_amplitude_monotone(&traces).unwrap();
        assert!(!fit.constraint_active);
        for (f, a) in fit.fits.iter().zip([1.0, 0.9, 0.8]) {
            assert!((f.amplitude / a - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn monotone_clips_rising_amplitudes() {
        let traces: Vec<_> = [(16, 0.8), (64, 0.9)]
            .iter()
            .map(|&(n, a)| synth(a, 30e-6, 1.0, n, 0.0, 40, 100e-6))
            .collect();
        let fit = fit_amplitude_monotone(&traces).unwrap();
        assert!(fit.constraint_active && fit.infeasible);
        assert!(fit.fits[0].amplitude >= fit.fits[1].amplitude);
        assert_relative_eq!(fit.fits[0].amplitude, 0.85, max_relative = 1e-12);
    }
}

//! Echo decay from a discrete bath of telegraph-flipping spins.
//!
//! Bath spins sit at distances `r_j` from the probe inside a
//! `D`-dimensional shell `exclusion_radius ≤ r ≤ region_size` and couple as
//! `b_j = p / r_j^α`. Each spin's field switches sign at Poisson times with
//! rate `flip_rate`, so its autocorrelation is `e^{−2λ|u|}` and its spectrum
//! is Lorentzian. The Hahn-echo phase is `Σ_j b_j (2 I_j(t/2) − I_j(t))`
//! with `I_j(s) = ∫₀^s σ_j`.
//!
//! With a fixed configuration the long-time echo is exponential; re-drawing
//! the positions every shot (configurational averaging) stretches it to
//! `exp(−(t/T)^{D/2α})`.

use std::f64::consts::PI;

use log::warn;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::shot_rng;
use crate::error::{Error, Result};
use crate::quad;
use crate::trace::ChiCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hopping {
    /// One spin configuration for every shot.
    None,
    /// Fresh positions for every shot.
    ResamplePerShot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipolarBathConfig {
    pub dimensionality: u32,
    /// 3 for dipolar coupling, 2 for a point-charge field.
    pub interaction_exponent: u32,
    /// Spins per unit `D`-volume (length unit of `region_size`).
    pub spin_density: f64,
    /// Telegraph switching rate `1/τ_c`, s⁻¹.
    pub flip_rate: f64,
    pub hopping: Hopping,
    /// `p` in `b = p/r^α`, rad/s · length^α.
    pub coupling_prefactor: f64,
    pub exclusion_radius: f64,
    /// Outer radius of the sampled shell.
    pub region_size: f64,
    /// Overrides `round(spin_density · shell volume)` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_spins: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

/// Minimum number of bath spins accepted.
pub const MIN_SPINS: usize = 10;

/// Surface measure of the unit sphere in `D` dimensions.
fn unit_sphere_area(d: u32) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

impl DipolarBathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimensionality) {
            return Err(Error::invalid(format!(
                "dimensionality must be 1, 2 or 3, got {}",
                self.dimensionality
            )));
        }
        if !(2..=3).contains(&self.interaction_exponent) {
            return Err(Error::invalid(format!(
                "interaction exponent must be 2 or 3, got {}",
                self.interaction_exponent
            )));
        }
        for (name, v) in [
            ("spin_density", self.spin_density),
            ("flip_rate", self.flip_rate),
            ("exclusion_radius", self.exclusion_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.coupling_prefactor.is_finite() && self.coupling_prefactor >= 0.0) {
            return Err(Error::invalid("coupling_prefactor must be >= 0"));
        }
        if !(self.region_size.is_finite() && self.region_size > self.exclusion_radius) {
            return Err(Error::invalid("region_size must exceed exclusion_radius"));
        }
        Ok(())
    }

    /// `D`-volume of the sampling shell.
    pub fn shell_volume(&self) -> f64 {
        let d = self.dimensionality as i32;
        unit_sphere_area(self.dimensionality) / d as f64
            * (self.region_size.powi(d) - self.exclusion_radius.powi(d))
    }

    /// Number of bath spins in the shell.
    pub fn spin_count(&self) -> Result<usize> {
        let n = self
            .n_spins
            .unwrap_or_else(|| (self.spin_density * self.shell_volume()).round() as usize);
        if n < MIN_SPINS {
            return Err(Error::invalid(format!(
                "only {n} bath spins in the region (need >= {MIN_SPINS}); enlarge region_size or density"
            )));
        }
        Ok(n)
    }

    /// Density used for the tail bound: the configured one, or the one
    /// implied by an explicit spin count.
    fn effective_density(&self, n: usize) -> f64 {
        if self.n_spins.is_some() {
            n as f64 / self.shell_volume()
        } else {
            self.spin_density
        }
    }

    fn coupling(&self, r: f64) -> f64 {
        self.coupling_prefactor / r.powi(self.interaction_exponent as i32)
    }

    fn sample_radius<R: Rng>(&self, rng: &mut R) -> f64 {
        let d = self.dimensionality as i32;
        let lo = self.exclusion_radius.powi(d);
        let hi = self.region_size.powi(d);
        let u: f64 = rng.random();
        (lo + u * (hi - lo)).powf(1.0 / d as f64)
    }

    /// Upper estimate of the `χ` contributed by spins beyond `region_size`
    /// at time `t`, from the weak-coupling limit `χ_j ≤ b_j² t/(2λ)`:
    /// `ρ S_D p² (t/2λ) R^{D−2α}/(2α − D)`.
    pub fn truncation_bound(&self, t: f64) -> f64 {
        let d = self.dimensionality as f64;
        let two_alpha = 2.0 * self.interaction_exponent as f64;
        let n = self.spin_count().unwrap_or(0);
        self.effective_density(n)
            * unit_sphere_area(self.dimensionality)
            * self.coupling_prefactor.powi(2)
            * (t / (2.0 * self.flip_rate))
            * self.region_size.powf(d - two_alpha)
            / (two_alpha - d)
    }
}

/// Exact Hahn-echo `⟨cos φ⟩` of one telegraph spin with coupling `b` and
/// switching rate `λ`, starting from the stationary state.
///
/// Propagates the two-state characteristic function through each half of
/// the echo with the closed-form 2×2 matrix exponential.
pub fn telegraph_echo_coherence(b: f64, flip_rate: f64, t: f64) -> f64 {
    if b == 0.0 || t <= 0.0 {
        return 1.0;
    }
    let lam = flip_rate;
    let h = 0.5 * t;
    // exp(h[[−λ + ic, λ], [λ, −λ − ic]]) = f0·I + f1·[[ic, λ], [λ, −ic]]
    let c2 = b * b;
    let (f0, f1) = if lam * lam >= c2 {
        let mu = (lam * lam - c2).sqrt();
        let slow = (-(c2 / (mu + lam)) * h).exp(); // e^{(μ−λ)h}
        let fast = (-(mu + lam) * h).exp();
        let f1 = if mu * h < 1e-8 {
            h * (-lam * h).exp()
        } else {
            (slow - fast) / (2.0 * mu)
        };
        (0.5 * (slow + fast), f1)
    } else {
        let nu = (c2 - lam * lam).sqrt();
        let damp = (-lam * h).exp();
        (damp * (nu * h).cos(), damp * (nu * h).sin() / nu)
    };
    // First half (sign +b) applied to (½, ½), then second half (sign −b),
    // then summed. Components are complex: v = (x + iy, x − iy) by symmetry.
    let m = |c: f64, v: (f64, f64, f64, f64)| -> (f64, f64, f64, f64) {
        // v = (re0, im0, re1, im1)
        let (a0, b0, a1, b1) = v;
        // row 0: (f0 + i f1 c) v0 + f1 λ v1
        let r0 = f0 * a0 - f1 * c * b0 + f1 * lam * a1;
        let i0 = f0 * b0 + f1 * c * a0 + f1 * lam * b1;
        // row 1: f1 λ v0 + (f0 − i f1 c) v1
        let r1 = f1 * lam * a0 + f0 * a1 + f1 * c * b1;
        let i1 = f1 * lam * b0 + f0 * b1 - f1 * c * a1;
        (r0, i0, r1, i1)
    };
    let v = m(b, (0.5, 0.0, 0.5, 0.0));
    let v = m(-b, v);
    v.0 + v.2
}

/// Exact `χ(t)` for a configuration-averaged bath of `n` spins placed
/// uniformly in the shell: `−n ln(1 − ⟨1 − g(b(r), t)⟩_shell)`, the shell
/// average taken by quadrature. Matches [`dipolar_echo_ensemble`] with
/// resampling in the limit of many shots.
pub fn dipolar_echo_oracle(config: &DipolarBathConfig, t: f64) -> Result<f64> {
    config.validate()?;
    let n = config.spin_count()? as f64;
    let d = config.dimensionality as i32;
    let area = unit_sphere_area(config.dimensionality);
    let volume = config.shell_volume();
    // Integrate in ln r: dV = S_D r^D d(ln r)
    let f = |lr: f64| {
        let r = lr.exp();
        let g = telegraph_echo_coherence(config.coupling(r), config.flip_rate, t);
        (1.0 - g) * area * r.powi(d)
    };
    let lo = config.exclusion_radius.ln();
    let hi = config.region_size.ln();
    let pts: Vec<f64> = (0..=64).map(|k| lo + (hi - lo) * k as f64 / 64.0).collect();
    let mean_loss = quad::integrate_partitioned(f, &pts, 1e-10, 0.0)?.value / volume;
    Ok(-n * (-mean_loss).ln_1p())
}

/// Exact `χ(t)` for a fixed set of couplings: `−Σ_j ln g(b_j, t)`.
pub fn fixed_configuration_chi(couplings: &[f64], flip_rate: f64, t: f64) -> f64 {
    couplings
        .iter()
        .map(|&b| -telegraph_echo_coherence(b, flip_rate, t).ln())
        .sum()
}

/// Output of [`dipolar_echo_ensemble`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipolarEchoResult {
    /// `χ = −ln⟨C⟩` at every time where `⟨C⟩ > 0`.
    pub chi: ChiCurve,
    /// Standard error of each `χ` sample.
    pub chi_stderr: Vec<f64>,
    /// `⟨C⟩` at every requested time.
    pub coherence: Vec<(f64, f64)>,
    pub n_spins: usize,
    /// Estimated `χ` lost to spins outside the region, per requested time.
    pub truncation_bound: Vec<f64>,
    /// Couplings of the fixed configuration (absent with resampling).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
}

/// Stream index reserved for drawing a fixed configuration.
const CONFIG_STREAM: u64 = u64::MAX;

/// Running integral `I(s) = ∫₀^s σ` of one telegraph history, evaluated at
/// sorted query times.
fn telegraph_integrals<R: Rng>(rng: &mut R, rate: f64, queries: &[f64], out: &mut [f64]) {
    let mut sigma = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut t_cur = 0.0;
    let mut acc = 0.0;
    let mut next = rng.sample::<f64, _>(Exp1) / rate;
    for (q, slot) in queries.iter().zip(out.iter_mut()) {
        while next < *q {
            acc += sigma * (next - t_cur);
            t_cur = next;
            sigma = -sigma;
            next += rng.sample::<f64, _>(Exp1) / rate;
        }
        *slot = acc + sigma * (q - t_cur);
    }
}

/// Monte Carlo Hahn-echo `χ(t)` for a dipolar telegraph bath.
pub fn dipolar_echo_ensemble(
    config: &DipolarBathConfig,
    times: &[f64],
    n_realizations: usize,
) -> Result<DipolarEchoResult> {
    config.validate()?;
    if times.is_empty() {
        return Err(Error::invalid("no echo times given"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("echo times must be positive and strictly increasing"));
    }
    if n_realizations < 2 {
        return Err(Error::invalid("need at least 2 realizations"));
    }
    if n_realizations < 1000 {
        warn!("{n_realizations} realizations is below the 10^3 advised for exponent estimates");
    }
    let n = config.spin_count()?;

    // Queries: every t/2 and t, sorted; index maps back per time.
    let mut queries: Vec<f64> = times.iter().flat_map(|&t| [0.5 * t, t]).collect();
    queries.sort_by(f64::total_cmp);
    queries.dedup();
    let idx = |x: f64| queries.binary_search_by(|q| q.total_cmp(&x)).expect("query present");
    let half_idx: Vec<usize> = times.iter().map(|&t| idx(0.5 * t)).collect();
    let full_idx: Vec<usize> = times.iter().map(|&t| idx(t)).collect();

    let fixed: Option<Vec<f64>> = match config.hopping {
        Hopping::None => {
            let mut rng = shot_rng(config.seed, CONFIG_STREAM);
            Some((0..n).map(|_| config.coupling(config.sample_radius(&mut rng))).collect())
        }
        Hopping::ResamplePerShot => None,
    };

    let per_shot: Vec<Vec<f64>> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|shot| {
            let mut rng = shot_rng(config.seed, shot);
            let mut phase = vec![0.0; times.len()];
            let mut integrals = vec![0.0; queries.len()];
            for j in 0..n {
                let b = match &fixed {
                    Some(c) => c[j],
                    None => config.coupling(config.sample_radius(&mut rng)),
                };
                telegraph_integrals(&mut rng, config.flip_rate, &queries, &mut integrals);
                for (k, p) in phase.iter_mut().enumerate() {
                    *p += b * (2.0 * integrals[half_idx[k]] - integrals[full_idx[k]]);
                }
            }
            phase
                .iter()
                .map(|&p| {
                    let s = (0.5 * p).sin();
                    2.0 * s * s
                })
                .collect()
        })
        .collect();

    let m = n_realizations as f64;
    let mut coherence = Vec::with_capacity(times.len());
    let mut chi = Vec::new();
    let mut chi_stderr = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let mean = per_shot.iter().map(|s| s[k]).sum::<f64>() / m;
        let var = per_shot.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let c = 1.0 - mean;
        coherence.push((t, c));
        if c > 0.0 {
            chi.push((t, -(-mean).ln_1p()));
            chi_stderr.push((var / m).sqrt() / c);
        } else {
            warn!("echo coherence at t = {t:e} s is not positive; dropped from chi");
        }
    }
    Ok(DipolarEchoResult {
        chi: ChiCurve::new(1, chi),
        chi_stderr,
        coherence,
        n_spins: n,
        truncation_bound: times.iter().map(|&t| config.truncation_bound(t)).collect(),
        couplings: fixed,
    })
}

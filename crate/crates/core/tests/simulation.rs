//! Simulators and solvers checked against closed-form oracles.

use std::f64::consts::PI;

use nanodecoh::bandbend::{solve_poisson, BandConfig, DefectKind, K_B_EV};
use nanodecoh::bathsim::gaussian::{simulate_bath_coherence, GaussianBath, OuComponent, PulseDephasingMode};
use nanodecoh::bathsim::{ou_trajectory, OUParams};
use nanodecoh::filterfn::{chi_exact, DecouplingSequence};
use nanodecoh::spectra::NoiseSpectrum;

fn autocovariance(x: &[f64], lag: usize) -> f64 {
    let n = x.len() - lag;
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    (0..n).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum::<f64>() / n as f64
}

#[test]
fn ou_trajectory_has_exponential_autocovariance() {
    let (sigma, tau) = (3.0e5, 1e-6);
    let dt = tau / 10.0;
    let params = OUParams::new(sigma, tau, dt, 31).unwrap();
    let path = ou_trajectory(&params, 4000.0 * tau).unwrap();
    for lag in [0usize, 5, 10, 20] {
        let got = autocovariance(&path, lag);
        let want = sigma * sigma * (-(lag as f64) * dt / tau).exp();
        // Sampling error of a covariance over 4000 correlation times is a few percent.
        assert!(
            (got - want).abs() < 0.08 * sigma * sigma,
            "lag {lag}: {got:e} vs {want:e}"
        );
    }
}

#[test]
fn ou_trajectory_mean_square_increment_matches_law() {
    // E[(b(t+h) − b(t))²] = 2σ²(1 − e^{−h/τ}).
    let (sigma, tau) = (1.0, 2.0);
    let params = OUParams::new(sigma, tau, 0.1, 8).unwrap();
    let path = ou_trajectory(&params, 20_000.0).unwrap();
    let msd = path.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (path.len() - 1) as f64;
    let want = 2.0 * (1.0 - (-0.05f64).exp());
    assert!((msd / want - 1.0).abs() < 0.03, "{msd} vs {want}");
}

fn lorentzian_bath(sigma: f64, tau: f64) -> GaussianBath {
    GaussianBath {
        components: vec![OuComponent { sigma, tau_c: tau }],
        white_floor: 0.0,
    }
}

#[test]
fn monte_carlo_error_shrinks_as_inverse_root_shots() {
    let (sigma, tau) = (2e5, 2e-6);
    let bath = lorentzian_bath(sigma, tau);
    let seq = DecouplingSequence::cpmg(8, 12e-6);
    let exact = (-chi_exact(&bath.spectrum(), &seq).unwrap()).exp();
    let mut errs = Vec::new();
    for shots in [500usize, 2000, 8000] {
        let p = simulate_bath_coherence(&bath, &seq, PulseDephasingMode::ZeroWidth, shots, 12).unwrap();
        assert!((p.c - exact).abs() < 4.0 * p.stderr, "{shots} shots: {} vs {exact}", p.c);
        errs.push(p.stderr);
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 2.0).abs() < 0.3, "stderr ratio {ratio}");
    }
}

/// `Var φ` for a piecewise-constant toggling weight on consecutive pieces
/// `(len, weight)` under an OU process of rms `sigma`, correlation time `tau`.
fn piecewise_phase_variance(pieces: &[(f64, f64)], sigma: f64, tau: f64) -> f64 {
    let mut starts = Vec::with_capacity(pieces.len());
    let mut t = 0.0;
    for &(len, _) in pieces {
        starts.push(t);
        t += len;
    }
    let tail = |l: f64| tau * (1.0 - (-l / tau).exp());
    let mut var = 0.0;
    for (i, &(li, wi)) in pieces.iter().enumerate() {
        var += wi * wi * 2.0 * tau * (li - tail(li));
        for (j, &(lj, wj)) in pieces.iter().enumerate().skip(i + 1) {
            let gap = starts[j] - (starts[i] + li);
            var += 2.0 * wi * wj * tail(li) * tail(lj) * (-gap / tau).exp();
        }
    }
    sigma * sigma * var
}

fn finite_pulse_pieces(seq: &DecouplingSequence, accumulate: bool) -> Vec<(f64, f64)> {
    let free = seq.free_segments();
    let mut out = Vec::new();
    let mut sign = 1.0;
    for (i, &len) in free.iter().enumerate() {
        out.push((len, sign));
        if i + 1 < free.len() {
            if accumulate {
                let h = seq.t_pi / 16.0;
                for k in 0..16 {
                    out.push((h, sign * (PI * (k as f64 + 0.5) / 16.0).cos()));
                }
            } else {
                out.push((seq.t_pi, 0.0));
            }
        }
        sign = -sign;
    }
    out
}

#[test]
fn finite_pulse_modes_match_time_domain_oracle() {
    let (sigma, tau) = (2e5, 2e-6);
    let bath = lorentzian_bath(sigma, tau);
    let seq = DecouplingSequence::cpmg(4, 8e-6).with_t_pi(0.4e-6);
    for (mode, accumulate) in [
        (PulseDephasingMode::FrozenDuringPulse, false),
        (PulseDephasingMode::AccumulateDuringPulse, true),
    ] {
        let var = piecewise_phase_variance(&finite_pulse_pieces(&seq, accumulate), sigma, tau);
        let want = (-0.5 * var).exp();
        let p = simulate_bath_coherence(&bath, &seq, mode, 20_000, 3).unwrap();
        assert!((p.c - want).abs() < 4.0 * p.stderr, "{mode:?}: {} vs {want}", p.c);
    }
    // Zero-width pulses ignore t_pi and reduce to the filter-function result.
    let zero = simulate_bath_coherence(&bath, &seq, PulseDephasingMode::ZeroWidth, 20_000, 3).unwrap();
    let want = (-chi_exact(&bath.spectrum(), &seq).unwrap()).exp();
    assert!((zero.c - want).abs() < 4.0 * zero.stderr);
}

#[test]
fn zero_width_oracle_agrees_with_filter_function() {
    let (sigma, tau) = (1.5e5, 3e-6);
    let seq = DecouplingSequence::cpmg(6, 10e-6);
    let pieces: Vec<(f64, f64)> = seq
        .free_segments()
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, if i % 2 == 0 { 1.0 } else { -1.0 }))
        .collect();
    let chi_time = 0.5 * piecewise_phase_variance(&pieces, sigma, tau);
    let chi_freq = chi_exact(&lorentzian_bath(sigma, tau).spectrum(), &seq).unwrap();
    assert!((chi_time / chi_freq - 1.0).abs() < 1e-5, "{chi_time} vs {chi_freq}");
}

#[test]
fn white_noise_decay_is_linear_in_time() {
    let s = NoiseSpectrum::white(4e4);
    for n in [1u32, 8, 64] {
        let a = chi_exact(&s, &DecouplingSequence::for_pulses(n, 10e-6)).unwrap();
        let b = chi_exact(&s, &DecouplingSequence::for_pulses(n, 40e-6)).unwrap();
        assert!((b / a - 4.0).abs() < 1e-9);
    }
}

#[test]
fn small_surface_bending_is_screened_like_linear_theory() {
    // Linearized Poisson in a sphere: φ(r) = φ_s R sinh(r/L) / (r sinh(R/L)),
    // with 1/L² = q² Σ N f(1 − f) / (ε kT) from the bulk occupancies.
    let phi_s = 1e-3;
    let cfg = BandConfig::flat().with_surface_bending(phi_s);
    let p = solve_poisson(&cfg).unwrap();
    let kt = K_B_EV * cfg.material.temperature;
    let susceptibility: f64 = p
        .defects
        .iter()
        .map(|d| {
            let total = d.bulk_neutral + d.bulk_charged;
            let f = d.bulk_charged / total;
            assert!(matches!(d.kind, DefectKind::Donor | DefectKind::Acceptor));
            total * 1e6 * f * (1.0 - f)
        })
        .sum();
    let eps = cfg.material.permittivity * 8.854_187_812_8e-12;
    let l_nm = (eps * kt / (1.602_176_634e-19 * susceptibility)).sqrt() * 1e9;
    let radius = cfg.radius;
    for &depth in &[0.5, 1.0, 2.0] {
        let r = radius - depth * l_nm;
        let k = p.r.iter().position(|&x| x >= r).unwrap();
        let want = phi_s * radius * (p.r[k] / l_nm).sinh() / (p.r[k] * (radius / l_nm).sinh());
        assert!(
            (p.phi[k] / want - 1.0).abs() < 0.03,
            "depth {depth} L (L = {l_nm:.2} nm): {} vs {want}",
            p.phi[k]
        );
    }
}

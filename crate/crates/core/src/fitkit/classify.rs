//! Spin-bath classification from the echo stretching exponent.
//!
//! Past the correlation time a fixed (Markovian) bath gives `χ ∝ t`, while
//! configurational averaging over spins spread in `D` dimensions with
//! `1/r^α` couplings gives `χ ∝ t^{D/2α}`. Before it, `χ ∝ t³`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::ChiCurve;

/// Multiples of `τ_c` beyond which the random-walk regime is fitted.
pub const RANDOM_WALK_START: f64 = 10.0;
pub const MIN_WINDOW_POINTS: usize = 4;
pub const MARKOVIAN_TOLERANCE: f64 = 0.25;
pub const AVERAGING_CEILING: f64 = 0.75;
pub const CANDIDATE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BathVerdict {
    FixedMarkovian,
    ConfigurationalAveraging,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub value: f64,
    pub stderr: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathClassification {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rw: Option<Slope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ballistic: Option<Slope>,
    pub verdict: BathVerdict,
    /// `(D, α)` pairs with `|n_rw − D/2α| ≤ 0.1`.
    pub candidates: Vec<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<Slope> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::data("slope needs at least two positive points"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::data("slope needs distinct times"));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let k = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| (p.1 - my - k * (p.0 - mx)).powi(2)).sum();
    let stderr = if pts.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(Slope {
        value: k,
        stderr,
        n_points: pts.len(),
    })
}

/// `(D, α)` combinations whose `D/2α` lies within 0.1 of `n`.
pub fn dimension_candidates(n: f64) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for d in 1..=3u32 {
        for alpha in 2..=3u32 {
            if (n - d as f64 / (2.0 * alpha as f64)).abs() <= CANDIDATE_TOLERANCE + 1e-12 {
                out.push((d, alpha));
            }
        }
    }
    out
}

fn verdict_for(n: f64) -> BathVerdict {
    if (n - 1.0).abs() <= MARKOVIAN_TOLERANCE {
        BathVerdict::FixedMarkovian
    } else if n <= AVERAGING_CEILING {
        BathVerdict::ConfigurationalAveraging
    } else {
        BathVerdict::Indeterminate
    }
}

/// Fits the stretching exponent for `t > 10τ_c` and, when at least three
/// points exist, the ballistic slope for `t < τ_c`.
pub fn classify_bath(echo: &ChiCurve, tau_c: f64) -> Result<BathClassification> {
    if !(tau_c > 0.0 && tau_c.is_finite()) {
        return Err(Error::invalid("tau_c must be > 0"));
    }
    let usable = |&&(t, x): &&(f64, f64)| t > 0.0 && x > 0.0 && x.is_finite();
    let late: Vec<(f64, f64)> = echo
        .samples
        .iter()
        .filter(usable)
        .filter(|(t, _)| *t > RANDOM_WALK_START * tau_c)
        .copied()
        .collect();
    let early: Vec<(f64, f64)> = echo
        .samples
        .iter()
        .filter(usable)
        .filter(|(t, _)| *t < tau_c)
        .copied()
        .collect();
    let n_ballistic = if early.len() >= 3 {
        log_log_slope(&early).ok()
    } else {
        None
    };
    if late.len() < MIN_WINDOW_POINTS {
        return Ok(BathClassification {
            n_rw: None,
            n_ballistic,
            verdict: BathVerdict::Indeterminate,
            candidates: vec![],
            reason: Some(format!(
                "only {} points beyond {RANDOM_WALK_START} tau_c (need {MIN_WINDOW_POINTS})",
                late.len()
            )),
        });
    }
    let n_rw = log_log_slope(&late)?;
    Ok(BathClassification {
        verdict: verdict_for(n_rw.value),
        candidates: dimension_candidates(n_rw.value),
        n_rw: Some(n_rw),
        n_ballistic,
        reason: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(f: impl Fn(f64) -> f64, times: &[f64]) -> ChiCurve {
        ChiCurve::new(1, times.iter().map(|&t| (t, f(t))).collect())
    }

    #[test]
    fn linear_chi_is_markovian() {
        let c = curve(|t| t / 3e-6, &[2e-5, 5e-5, 1e-4, 3e-4, 1e-3]);
        let r = classify_bath(&c, 1e-6).unwrap();
        assert!((r.n_rw.unwrap().value - 1.0).abs() < 1e-12);
        assert_eq!(r.verdict, BathVerdict::FixedMarkovian);
    }

    #[test]
    fn square_root_suggests_three_d_dipolar() {
        let c = curve(|t| (t / 1e-6).sqrt(), &[2e-5, 5e-5, 1e-4, 3e-4]);
        let r = classify_bath(&c, 1e-6).unwrap();
        assert_eq!(r.verdict, BathVerdict::ConfigurationalAveraging);
        assert!(r.candidates.contains(&(3, 3)));
    }

    #[test]
    fn ballistic_cubic() {
        let times: Vec<f64> = (1..8).map(|i| i as f64 * 1e-8).collect();
        let c = curve(|t| (t / 1e-6).powi(3), &times);
        let r = classify_bath(&c, 1e-6).unwrap();
        assert_eq!(r.verdict, BathVerdict::Indeterminate);
        assert!((r.n_ballistic.unwrap().value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn scale_invariance() {
        let times = [2e-5, 5e-5, 1e-4, 3e-4];
        let a = classify_bath(&curve(|t| (t / 1e-6).powf(0.4), &times), 1e-6).unwrap();
        let b = classify_bath(&curve(|t| 7.5 * (t / 1e-6).powf(0.4), &times), 1e-6).unwrap();
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.candidates, b.candidates);
    }
}

//! Single-exponential decay `A·exp(−t/τ)`, shared by the relaxation and DEER
//! fits.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub amplitude: f64,
    /// Decay rate `1/τ`, s⁻¹.
    pub rate: f64,
    pub residual_norm: f64,
    /// Standard error of `rate` from the residual scatter (0 for exact data).
    pub rate_stderr: f64,
}

pub fn fit_exponential(samples: &[(f64, f64)]) -> Result<ExpFit> {
    if samples.len() < 3 {
        return Err(Error::data("exponential fit needs >= 3 samples"));
    }
    let scale = samples.iter().map(|s| s.0.abs()).fold(0.0, f64::max);
    if scale <= 0.0 {
        return Err(Error::data("exponential fit needs nonzero times"));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0 / scale).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();

    // Start from a log-linear regression on the positive samples.
    let pos: Vec<(f64, f64)> = xs
        .iter()
        .zip(&ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x, y.ln()))
        .collect();
    let (a0, r0) = if pos.len() >= 2 {
        let n = pos.len() as f64;
        let mx = pos.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pos.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pos.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pos.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { -1.0 };
        ((my - slope * mx).exp(), (-slope).max(1e-3))
    } else {
        (ys[0].abs().max(1e-3), 1.0)
    };

    let residual = |p: &[f64], r: &mut [f64]| {
        for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
            r[i] = p[0] * (-p[1] * x).exp() - y;
        }
    };
    let jacobian = |p: &[f64], j: &mut DMatrix<f64>| {
        for (i, &x) in xs.iter().enumerate() {
            let e = (-p[1] * x).exp();
            j[(i, 0)] = e;
            j[(i, 1)] = -p[0] * x * e;
        }
    };
    let out = levenberg_marquardt(&residual, Some(&jacobian), &[a0, r0], xs.len(), &LmOptions::default());
    if !out.converged {
        return Err(Error::Fit(format!(
            "exponential fit did not converge (ssr {:.3e} after {} iterations)",
            out.ssr, out.iterations
        )));
    }
    // Rate variance from (JᵀJ)⁻¹ σ².
    let mut jac = DMatrix::zeros(xs.len(), 2);
    jacobian(&out.params, &mut jac);
    let dof = xs.len().saturating_sub(2).max(1) as f64;
    let rate_stderr = (jac.transpose() * &jac)
        .try_inverse()
        .map(|cov| (cov[(1, 1)] * out.ssr / dof).sqrt() / scale)
        .unwrap_or(f64::NAN);
    Ok(ExpFit {
        amplitude: out.params[0],
        rate: out.params[1] / scale,
        residual_norm: out.ssr.sqrt(),
        rate_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_recovery() {
        let s: Vec<_> = (0..20).map(|i| (i as f64 * 1e-5, 0.7 * (-(i as f64 * 1e-5) * 3e4).exp())).collect();
        let f = fit_exponential(&s).unwrap();
        assert_relative_eq!(f.rate, 3e4, max_relative = 1e-9);
        assert_relative_eq!(f.amplitude, 0.7, max_relative = 1e-9);
    }
}

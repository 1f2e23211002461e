//! `T₂(N) = T₂,echo · N^k` by ordinary least squares in log-log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub t2_echo: f64,
    pub k: f64,
    /// Standard error of `ln T₂,echo`.
    pub ln_t2_echo_stderr: f64,
    pub k_stderr: f64,
    pub n_points: usize,
}

pub fn fit_power_law(points: &[(u32, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::data(format!(
            "power-law fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(n, t2)| n < 1 || !(t2 > 0.0 && t2.is_finite())) {
        return Err(Error::data("power-law points need N >= 1 and T2 > 0"));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::data("all pulse counts are equal; slope undefined"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let k = sxy / sxx;
    let intercept = my - k * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - k * x).powi(2))
        .sum();
    let s2 = if points.len() > 2 { rss / (n - 2.0) } else { 0.0 };
    Ok(PowerLawFit {
        t2_echo: intercept.exp(),
        k,
        ln_t2_echo_stderr: (s2 * (1.0 / n + mx * mx / sxx)).sqrt(),
        k_stderr: (s2 / sxx).sqrt(),
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_log_linear_data() {
        let pts: Vec<_> = [1u32, 16, 64, 256, 1024]
            .iter()
            .map(|&n| (n, 1.42e-6 * (n as f64).powf(0.53)))
            .collect();
        let f = fit_power_law(&pts).unwrap();
        assert_relative_eq!(f.k, 0.53, max_relative = 1e-12);
        assert_relative_eq!(f.t2_echo, 1.42e-6, max_relative = 1e-12);
        assert!(f.k_stderr < 1e-12);
    }

    #[test]
    fn flat_data_has_zero_slope() {
        let f = fit_power_law(&[(1, 5e-6), (8, 5e-6), (64, 5e-6)]).unwrap();
        assert!(f.k.abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_power_law(&[(4, 1.0), (4, 2.0), (4, 3.0)]).is_err());
        assert!(fit_power_law(&[(1, 1.0), (2, 2.0)]).is_err());
    }
}

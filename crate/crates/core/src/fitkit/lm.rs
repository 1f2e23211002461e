//! Bound-constrained Levenberg–Marquardt.
//!
//! Minimizes `½‖r(p)‖²` with Marquardt's diagonal scaling. Trial points are
//! projected onto the box `[lower, upper]`. Iteration stops when the
//! relative step falls below `step_tol`, when the cost stops decreasing, or
//! after `max_iter` iterations.

use nalgebra::{DMatrix, DVector};

/// Residual callback: fills `out` with `r(p)`.
pub type ResidualFn<'a> = dyn Fn(&[f64], &mut [f64]) + 'a;
/// Jacobian callback: fills the `m × n` matrix with `∂r_i/∂p_j`.
pub type JacobianFn<'a> = dyn Fn(&[f64], &mut DMatrix<f64>) + 'a;

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iter: usize,
    pub step_tol: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            step_tol: 1e-10,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub ssr: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(p: &mut [f64], opts: &LmOptions) {
    if let Some(lo) = &opts.lower {
        for (x, l) in p.iter_mut().zip(lo) {
            *x = x.max(*l);
        }
    }
    if let Some(hi) = &opts.upper {
        for (x, h) in p.iter_mut().zip(hi) {
            *x = x.min(*h);
        }
    }
}

/// Central-difference Jacobian.
pub fn numeric_jacobian(f: &ResidualFn<'_>, p: &[f64], m: usize, jac: &mut DMatrix<f64>) {
    let mut x = p.to_vec();
    let mut rp = vec![0.0; m];
    let mut rm = vec![0.0; m];
    for j in 0..p.len() {
        let h = 1e-6 * p[j].abs().max(1e-6);
        x[j] = p[j] + h;
        f(&x, &mut rp);
        x[j] = p[j] - h;
        f(&x, &mut rm);
        x[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
}

fn ssr(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Runs LM from `p0`. `jacobian = None` uses central differences.
pub fn levenberg_marquardt(
    residual: &ResidualFn<'_>,
    jacobian: Option<&JacobianFn<'_>>,
    p0: &[f64],
    m: usize,
    opts: &LmOptions,
) -> LmOutcome {
    let n = p0.len();
    let mut p = p0.to_vec();
    project(&mut p, opts);
    let mut r = vec![0.0; m];
    residual(&p, &mut r);
    let mut cost = ssr(&r);
    let mut jac = DMatrix::zeros(m, n);
    let mut mu = 1e-3;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;

    if !cost.is_finite() {
        return LmOutcome {
            params: p,
            ssr: cost,
            iterations: 0,
            converged: false,
        };
    }

    'outer: while iterations < opts.max_iter {
        iterations += 1;
        match jacobian {
            Some(j) => j(&p, &mut jac),
            None => numeric_jacobian(residual, &p, m, &mut jac),
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * rv;
        if g.amax() == 0.0 {
            converged = true;
            break;
        }
        loop {
            let mut a = jtj.clone();
            for d in 0..n {
                let diag = jtj[(d, d)];
                a[(d, d)] += mu * if diag > 0.0 { diag } else { 1.0 };
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    mu *= 10.0;
                    if mu > 1e30 {
                        break 'outer;
                    }
                    continue;
                }
            };
            for k in 0..n {
                trial[k] = p[k] + step[k];
            }
            project(&mut trial, opts);
            residual(&trial, &mut r_trial);
            let new_cost = ssr(&r_trial);
            if new_cost.is_finite() && new_cost <= cost {
                let moved: f64 = trial.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let size: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                let stalled = cost - new_cost <= 1e-15 * cost;
                p.copy_from_slice(&trial);
                r.copy_from_slice(&r_trial);
                cost = new_cost;
                mu = (mu / 3.0).max(1e-15);
                if moved <= opts.step_tol * (size + opts.step_tol) || stalled || cost == 0.0 {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            mu *= 4.0;
            if mu > 1e30 {
                // No descent possible from here: a (possibly constrained)
                // stationary point.
                converged = true;
                break 'outer;
            }
        }
    }
    LmOutcome {
        params: p,
        ssr: cost,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let f = |p: &[f64], r: &mut [f64]| {
            r[0] = 10.0 * (p[1] - p[0] * p[0]);
            r[1] = 1.0 - p[0];
        };
        let out = levenberg_marquardt(&f, None, &[-1.2, 1.0], 2, &LmOptions::default());
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-8 && (out.params[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn respects_bounds() {
        let f = |p: &[f64], r: &mut [f64]| r[0] = p[0] - 3.0;
        let opts = LmOptions {
            upper: Some(vec![2.0]),
            ..Default::default()
        };
        let out = levenberg_marquardt(&f, None, &[0.0], 1, &opts);
        assert!((out.params[0] - 2.0).abs() < 1e-12);
    }
}

//! Newton solver for the spherically symmetric Poisson equation.
//!
//! With the band bending `V(r)` (eV, the shift of every band edge), the
//! equation `(1/r²) d/dr (r² ε ε₀ dφ/dr) = −ρ` becomes, in units of the
//! thermal energy and the Debye length `L = √(ε ε₀ kT / e² N_ref)`,
//!
//! ```text
//! (1/x²) d/dx (x² du/dx) = ρ(u)/(e N_ref),   u = V/kT,  x = r/L.
//! ```
//!
//! The grid is uniform with node 0 at the centre and node `M` on the surface.
//! Each interior node owns the spherical shell between its neighbouring
//! midpoints, so the discrete flux balance is Gauss's law cell by cell.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{BandConfig, DefectKind};
use crate::error::{Error, Result};

const EPS0: f64 = 8.854_187_812_8e-12;
const E_CHARGE: f64 = 1.602_176_634e-19;

/// Newton controls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the largest update is below this, eV.
    pub update_tol: f64,
    /// Largest scaled residual accepted at convergence.
    pub residual_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            update_tol: 1e-6,
            residual_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectProfile {
    pub name: String,
    pub kind: DefectKind,
    /// Neutral density at each node, cm⁻³.
    pub neutral: Vec<f64>,
    /// Charged density at each node (ionized donors or occupied
    /// acceptors), cm⁻³.
    pub charged: Vec<f64>,
    /// Flat-band neutral density.
    pub bulk_neutral: f64,
    /// Flat-band charged density.
    pub bulk_charged: f64,
}

/// A solved radial profile. Band energies are referenced to the Fermi level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandProfile {
    /// nm, from 0 to the core radius.
    pub r: Vec<f64>,
    /// Band bending, eV.
    pub phi: Vec<f64>,
    pub ec: Vec<f64>,
    pub ev: Vec<f64>,
    /// Fermi level above the bulk valence-band edge, eV.
    pub fermi_above_valence: f64,
    pub defects: Vec<DefectProfile>,
    /// Largest scaled Poisson residual at the returned solution.
    pub residual_norm: f64,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    /// Net charge of the core, elementary charges.
    pub total_charge: f64,
    /// Charge implied by the surface field through Gauss's law.
    pub surface_field_charge: f64,
    /// `|total − surface| / max(|total|, |surface|)`, 0 when both vanish.
    pub gauss_closure: f64,
}

impl BandProfile {
    pub fn defect(&self, name: &str) -> Option<&DefectProfile> {
        self.defects.iter().find(|d| d.name == name)
    }

    /// Writes `r_nm,phi_eV,Ec_eV,Ev_eV` followed by a neutral and a charged
    /// column per defect.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        crate::trace::write_comments(&mut out, comments)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["r_nm", "phi_eV", "Ec_eV", "Ev_eV"].map(String::from).to_vec();
        for d in &self.defects {
            let charged = match d.kind {
                DefectKind::Donor => "ionized",
                DefectKind::Acceptor => "charged",
            };
            header.push(format!("{}_neutral_cm3", d.name));
            header.push(format!("{}_{charged}_cm3", d.name));
        }
        w.write_record(&header)?;
        use crate::trace::fmt;
        for i in 0..self.r.len() {
            let mut row = vec![fmt(self.r[i]), fmt(self.phi[i]), fmt(self.ec[i]), fmt(self.ev[i])];
            for d in &self.defects {
                row.push(fmt(d.neutral[i]));
                row.push(fmt(d.charged[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Logistic `1/(1 + e^z)` without overflow.
fn fermi(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Local charge model in thermal units. For a bending `u` (in kT) it returns
/// the charge density and its derivative, both divided by `N_ref`.
struct ChargeModel {
    /// `(E_c − E_f)/kT` in the bulk.
    ec_f: f64,
    /// `(E_f − E_v)/kT` in the bulk.
    ef_v: f64,
    nc: f64,
    nv: f64,
    defects: Vec<Site>,
    n_ref: f64,
}

struct Site {
    kind: DefectKind,
    density: f64,
    /// `ln g + (E_f − E_d)/kT` for donors, `ln g + (E_a − E_f)/kT` for
    /// acceptors, so the charged fraction is `fermi(offset ∓ u)`.
    offset: f64,
}

impl Site {
    fn charged_fraction(&self, u: f64) -> f64 {
        match self.kind {
            DefectKind::Donor => fermi(self.offset - u),
            DefectKind::Acceptor => fermi(self.offset + u),
        }
    }
}

impl ChargeModel {
    fn new(cfg: &BandConfig, fermi_above_valence: f64) -> Self {
        let m = &cfg.material;
        let kt = m.thermal_energy();
        let defects = cfg
            .defects
            .iter()
            .map(|d| {
                let level = d.level.above_valence(m.band_gap);
                let offset = match d.kind {
                    DefectKind::Donor => d.degeneracy.ln() + (fermi_above_valence - level) / kt,
                    DefectKind::Acceptor => d.degeneracy.ln() + (level - fermi_above_valence) / kt,
                };
                Site {
                    kind: d.kind,
                    density: d.density,
                    offset,
                }
            })
            .collect::<Vec<_>>();
        let n_ref = cfg
            .defects
            .iter()
            .map(|d| d.density)
            .fold(0.0, f64::max)
            .max(1e12);
        Self {
            ec_f: (m.band_gap - fermi_above_valence) / kt,
            ef_v: fermi_above_valence / kt,
            nc: m.nc,
            nv: m.nv,
            defects,
            n_ref,
        }
    }

    /// Absolute charge density in e·cm⁻³.
    fn rho_abs(&self, u: f64) -> f64 {
        let n = self.nc * (-self.ec_f - u).exp();
        let p = self.nv * (-self.ef_v + u).exp();
        let mut rho = p - n;
        for s in &self.defects {
            let q = s.density * s.charged_fraction(u);
            match s.kind {
                DefectKind::Donor => rho += q,
                DefectKind::Acceptor => rho -= q,
            }
        }
        rho
    }

    /// `(ρ/N_ref, dρ/du / N_ref)`.
    fn rho(&self, u: f64) -> (f64, f64) {
        let n = self.nc * (-self.ec_f - u).exp();
        let p = self.nv * (-self.ef_v + u).exp();
        let mut rho = p - n;
        let mut d = p + n;
        for s in &self.defects {
            let f = s.charged_fraction(u);
            let q = s.density * f;
            let dq = s.density * f * (1.0 - f);
            match s.kind {
                DefectKind::Donor => rho += q,
                DefectKind::Acceptor => rho -= q,
            }
            d += dq;
        }
        (rho / self.n_ref, d / self.n_ref)
    }
}

/// Fermi level (above `E_v`) that makes the bulk neutral.
fn bulk_fermi_level(cfg: &BandConfig) -> Result<f64> {
    let gap = cfg.material.band_gap;
    let charge = |ef: f64| ChargeModel::new(cfg, ef).rho_abs(0.0);
    let (mut lo, mut hi) = (0.0, gap);
    if charge(lo) < 0.0 || charge(hi) > 0.0 {
        return Err(Error::Domain("bulk charge neutrality has no solution inside the gap".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if charge(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Discrete operator on the uniform grid `x_i = i h`, `i = 0..=m`.
struct Grid {
    h: f64,
    /// `x²` at the right face of each cell.
    face: Vec<f64>,
    /// Cell volumes `(x_{i+½}³ − x_{i−½}³)/3`.
    vol: Vec<f64>,
}

impl Grid {
    fn new(m: usize, h: f64) -> Self {
        let face = (0..m).map(|i| ((i as f64 + 0.5) * h).powi(2)).collect();
        let vol = (0..=m)
            .map(|i| {
                let right = (i as f64 + 0.5) * h;
                let left = if i == 0 { 0.0 } else { (i as f64 - 0.5) * h };
                (right.powi(3) - left.powi(3)) / 3.0
            })
            .collect();
        Self { h, face, vol }
    }

    /// Residual `div(x² ∇u)/vol − ρ` at every unknown node (`0..m`).
    fn residual(&self, u: &[f64], model: &ChargeModel, out: &mut [f64]) -> f64 {
        let m = u.len() - 1;
        let mut max = 0.0f64;
        for i in 0..m {
            let right = self.face[i] * (u[i + 1] - u[i]) / self.h;
            let left = if i == 0 {
                0.0
            } else {
                self.face[i - 1] * (u[i] - u[i - 1]) / self.h
            };
            let r = (right - left) / self.vol[i] - model.rho(u[i]).0;
            out[i] = r;
            max = max.max(r.abs());
        }
        max
    }
}

/// Thomas algorithm for a tridiagonal system; `b` is the diagonal.
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut beta = b[0];
    d[0] /= beta;
    for i in 1..n {
        cp[i - 1] = c[i - 1] / beta;
        beta = b[i] - a[i] * cp[i - 1];
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

struct NewtonRun {
    converged: bool,
    iterations: usize,
    residual: f64,
    history: Vec<f64>,
}

/// Newton iteration with logarithmic step damping: each component of the
/// update `δ` is replaced by `sign(δ) ln(1 + |δ|)`, which leaves small steps
/// unchanged and keeps large early steps from overshooting the exponential
/// charge terms.
fn newton(u: &mut [f64], grid: &Grid, model: &ChargeModel, kt: f64, opts: &SolverOptions) -> NewtonRun {
    let m = u.len() - 1;
    let mut res = vec![0.0; m];
    let (mut lower, mut diag, mut upper) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut history = Vec::new();
    let mut r = grid.residual(u, model, &mut res);
    for it in 1..=opts.max_iter {
        history.push(r);
        for i in 0..m {
            let wr = grid.face[i] / (grid.h * grid.vol[i]);
            let wl = if i == 0 {
                0.0
            } else {
                grid.face[i - 1] / (grid.h * grid.vol[i])
            };
            lower[i] = wl;
            upper[i] = if i + 1 < m { wr } else { 0.0 };
            diag[i] = -wr - wl - model.rho(u[i]).1;
            res[i] = -res[i];
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut res);
        let mut max_step = 0.0f64;
        for i in 0..m {
            let d = res[i];
            let step = d.signum() * d.abs().ln_1p();
            u[i] += step;
            max_step = max_step.max(step.abs());
        }
        r = grid.residual(u, model, &mut res);
        if !r.is_finite() {
            history.push(r);
            return NewtonRun {
                converged: false,
                iterations: it,
                residual: r,
                history,
            };
        }
        if max_step * kt < opts.update_tol && r < opts.residual_tol {
            history.push(r);
            return NewtonRun {
                converged: true,
                iterations: it,
                residual: r,
                history,
            };
        }
    }
    history.push(r);
    NewtonRun {
        converged: false,
        iterations: opts.max_iter,
        residual: r,
        history,
    }
}

/// Composite Simpson (trapezoid on a leftover interval) on a uniform grid.
fn simpson(y: &[f64], h: f64) -> f64 {
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

/// Solves for the radial bending with the default solver options.
pub fn solve_poisson(cfg: &BandConfig) -> Result<BandProfile> {
    solve_poisson_with(cfg, &SolverOptions::default())
}

/// Solves for the radial bending. The Fermi level is set by neutrality of
/// the bulk material, the centre has zero field and the surface bending is
/// prescribed. If plain Newton fails, the surface value is ramped up in
/// stages with each stage started from the previous solution.
pub fn solve_poisson_with(cfg: &BandConfig, opts: &SolverOptions) -> Result<BandProfile> {
    cfg.validate()?;
    let kt = cfg.material.thermal_energy();
    let ef = bulk_fermi_level(cfg)?;
    let model = ChargeModel::new(cfg, ef);

    // Debye length for N_ref, in nm.
    let eps = cfg.material.permittivity * EPS0;
    let debye_m = (eps * kt / (E_CHARGE * model.n_ref * 1e6)).sqrt();
    let debye_nm = debye_m * 1e9;
    let m = cfg.grid_points - 1;
    let x_end = cfg.radius / debye_nm;
    let h = x_end / m as f64;
    let grid = Grid::new(m, h);

    let us = cfg.surface_bending / kt;
    let initial = |target: f64| -> Vec<f64> {
        (0..=m)
            .map(|i| target * (i as f64 * h - x_end).max(-700.0).exp())
            .collect()
    };

    let mut u = initial(us);
    let mut run = newton(&mut u, &grid, &model, kt, opts);
    let mut history = run.history.clone();
    let mut iterations = run.iterations;
    if !run.converged {
        let stages = 16;
        u = vec![0.0; m + 1];
        for k in 1..=stages {
            u[m] = us * k as f64 / stages as f64;
            run = newton(&mut u, &grid, &model, kt, opts);
            history.extend_from_slice(&run.history);
            iterations += run.iterations;
            if !run.converged {
                return Err(Error::Divergence {
                    iterations,
                    residual: run.residual,
                    message: format!(
                        "Poisson solve for surface bending {} eV stalled at continuation stage {k}/{stages}",
                        cfg.surface_bending
                    ),
                    history,
                });
            }
        }
    }

    // Physical profiles.
    let r: Vec<f64> = (0..=m).map(|i| i as f64 * h * debye_nm).collect();
    let phi: Vec<f64> = u.iter().map(|v| v * kt).collect();
    let gap = cfg.material.band_gap;
    let ec = phi.iter().map(|p| gap - ef + p).collect();
    let ev = phi.iter().map(|p| -ef + p).collect();
    let defects = cfg
        .defects
        .iter()
        .zip(&model.defects)
        .map(|(d, s)| {
            let charged: Vec<f64> = u.iter().map(|&v| d.density * s.charged_fraction(v)).collect();
            let neutral = charged.iter().map(|q| d.density - q).collect();
            let bulk_charged = d.density * s.charged_fraction(0.0);
            DefectProfile {
                name: d.name.clone(),
                kind: d.kind,
                neutral,
                charged,
                bulk_neutral: d.density - bulk_charged,
                bulk_charged,
            }
        })
        .collect();

    // Gauss's law in natural units: ∫ρ x² dx against x_end² u'(x_end).
    let rho_x2: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(i, &v)| model.rho(v).0 * (i as f64 * h).powi(2))
        .collect();
    let q_nat = simpson(&rho_x2, h);
    let du = (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * h);
    let flux_nat = x_end * x_end * du;
    let to_charge = 4.0 * std::f64::consts::PI * model.n_ref * (debye_nm * 1e-7).powi(3);
    // Below this the core is neutral to rounding (fully ionized is x³/3).
    let negligible = 1e-10 * x_end.powi(3);
    let scale = q_nat.abs().max(flux_nat.abs());
    let gauss_closure = if scale < negligible {
        0.0
    } else {
        (q_nat - flux_nat).abs() / scale
    };

    Ok(BandProfile {
        r,
        phi,
        ec,
        ev,
        fermi_above_valence: ef,
        defects,
        residual_norm: run.residual,
        residual_history: history,
        iterations,
        total_charge: q_nat * to_charge,
        surface_field_charge: flux_nat * to_charge,
        gauss_closure,
    })
}

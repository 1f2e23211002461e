//! Radial band bending in a spherical diamond nanocrystal.
//!
//! A prescribed surface bending (from the diamond/shell Fermi-level
//! alignment, or a measured value) drives a nonlinear Poisson problem whose
//! charge comes from free carriers and from partially ionized defect levels.
//! The solution gives the neutral (paramagnetic) P1 profile and the NV⁻
//! occupation throughout the particle.
//!
//! Energies are in eV, lengths in nm and densities in cm⁻³ at the API.
//! Bending is signed: positive means the bands bend upward towards the
//! surface.

mod poisson;
mod report;

pub use poisson::{solve_poisson, BandProfile, DefectProfile, SolverOptions};
pub use report::{
    nv_stability_report, p1_depletion_report, DepletionReport, ThresholdWidth, DEFAULT_DEPLETION_THRESHOLD,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant, eV/K.
pub const K_B_EV: f64 = 8.617_333_262e-5;

/// Atomic density of diamond, cm⁻³; converts ppm to absolute density.
pub const CARBON_DENSITY: f64 = 1.76e23;

/// Converts a concentration in ppm (per carbon atom) to cm⁻³.
pub fn ppm_to_density(ppm: f64) -> f64 {
    ppm * 1e-6 * CARBON_DENSITY
}

/// Bulk band parameters of one material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialBands {
    /// eV.
    pub band_gap: f64,
    /// Conduction-band edge below vacuum, eV.
    pub electron_affinity: f64,
    pub permittivity: f64,
    /// K.
    pub temperature: f64,
    /// Effective density of states of the conduction band, cm⁻³.
    #[serde(default = "default_nc")]
    pub nc: f64,
    /// Effective density of states of the valence band, cm⁻³.
    #[serde(default = "default_nv")]
    pub nv: f64,
}

fn default_nc() -> f64 {
    1.08e19
}

fn default_nv() -> f64 {
    1.8e19
}

impl MaterialBands {
    /// Diamond at 300 K: 5.5 eV gap, 2 eV electron affinity, ε = 5.7.
    pub fn diamond() -> Self {
        Self {
            band_gap: 5.5,
            electron_affinity: 2.0,
            permittivity: 5.7,
            temperature: 300.0,
            nc: default_nc(),
            nv: default_nv(),
        }
    }

    /// Amorphous silica: 9.4 eV gap, conduction band 0.7 eV below vacuum.
    pub fn silica() -> Self {
        Self {
            band_gap: 9.4,
            electron_affinity: 0.7,
            permittivity: 3.9,
            temperature: 300.0,
            nc: 2.8e19,
            nv: 1.0e19,
        }
    }

    pub fn thermal_energy(&self) -> f64 {
        K_B_EV * self.temperature
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.band_gap.is_finite() && self.band_gap > 0.0) {
            return Err(Error::invalid("band gap must be > 0"));
        }
        if !(self.permittivity.is_finite() && self.permittivity >= 1.0) {
            return Err(Error::invalid("relative permittivity must be >= 1"));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::invalid("temperature must be > 0"));
        }
        if !(self.nc > 0.0 && self.nv > 0.0) {
            return Err(Error::invalid("effective densities of states must be > 0"));
        }
        if !self.electron_affinity.is_finite() {
            return Err(Error::invalid("electron affinity must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectKind {
    /// Neutral when occupied, positive when ionized.
    Donor,
    /// Neutral when empty, negative when occupied.
    Acceptor,
}

/// Where a level sits in the gap, as a positive depth from one band edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelPosition {
    BelowConduction(f64),
    AboveValence(f64),
}

impl LevelPosition {
    /// Level energy above the valence-band edge.
    pub fn above_valence(&self, band_gap: f64) -> f64 {
        match *self {
            LevelPosition::BelowConduction(d) => band_gap - d,
            LevelPosition::AboveValence(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectLevel {
    pub name: String,
    /// cm⁻³.
    pub density: f64,
    pub level: LevelPosition,
    pub kind: DefectKind,
    pub degeneracy: f64,
}

impl DefectLevel {
    /// Substitutional nitrogen, a deep donor 1.7 eV below the conduction band.
    pub fn p1(density: f64) -> Self {
        Self {
            name: "P1".into(),
            density,
            level: LevelPosition::BelowConduction(1.7),
            kind: DefectKind::Donor,
            degeneracy: 2.0,
        }
    }

    /// The NV(−/0) transition, an acceptor 2 eV above the valence band.
    pub fn nv(density: f64) -> Self {
        Self {
            name: "NV".into(),
            density,
            level: LevelPosition::AboveValence(2.0),
            kind: DefectKind::Acceptor,
            degeneracy: 4.0,
        }
    }

    pub fn validate(&self, band_gap: f64) -> Result<()> {
        if !(self.density.is_finite() && self.density >= 0.0) {
            return Err(Error::invalid(format!("defect '{}': density must be >= 0", self.name)));
        }
        let e = self.level.above_valence(band_gap);
        if !(e > 0.0 && e < band_gap) {
            return Err(Error::invalid(format!(
                "defect '{}': level {e} eV above E_v lies outside the gap",
                self.name
            )));
        }
        if !(self.degeneracy.is_finite() && self.degeneracy > 0.0) {
            return Err(Error::invalid(format!("defect '{}': degeneracy must be > 0", self.name)));
        }
        Ok(())
    }
}

/// Default radial grid size.
pub const DEFAULT_GRID_POINTS: usize = 2001;
/// Smallest accepted radial grid.
pub const MIN_GRID_POINTS: usize = 200;

/// Surface bending of the oxygen-terminated bare particle, eV.
pub const BARE_SURFACE_BENDING: f64 = -0.5;
/// Diamond-side bending of the silica-coated particle, eV.
pub const CORE_SHELL_SURFACE_BENDING: f64 = 0.225;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    /// nm.
    pub radius: f64,
    pub material: MaterialBands,
    pub defects: Vec<DefectLevel>,
    /// eV, positive upward.
    pub surface_bending: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

fn default_grid() -> usize {
    DEFAULT_GRID_POINTS
}

impl BandConfig {
    /// 35 nm diamond core with 100 ppm P1 and NV at 1 ppm, no bending.
    pub fn flat() -> Self {
        Self {
            radius: 35.0,
            material: MaterialBands::diamond(),
            defects: vec![
                DefectLevel::p1(ppm_to_density(100.0)),
                DefectLevel::nv(ppm_to_density(1.0)),
            ],
            surface_bending: 0.0,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }

    pub fn bare() -> Self {
        Self {
            surface_bending: BARE_SURFACE_BENDING,
            ..Self::flat()
        }
    }

    pub fn core_shell() -> Self {
        Self {
            surface_bending: CORE_SHELL_SURFACE_BENDING,
            ..Self::flat()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "flat" => Ok(Self::flat()),
            "bare" => Ok(Self::bare()),
            "core-shell" | "core_shell" => Ok(Self::core_shell()),
            other => Err(Error::invalid(format!(
                "unknown band preset '{other}' (expected flat, bare or core-shell)"
            ))),
        }
    }

    pub fn with_surface_bending(mut self, bending: f64) -> Self {
        self.surface_bending = bending;
        self
    }

    pub fn with_grid_points(mut self, n: usize) -> Self {
        self.grid_points = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::invalid("core radius must be > 0"));
        }
        if self.grid_points < MIN_GRID_POINTS {
            return Err(Error::invalid(format!(
                "radial grid needs at least {MIN_GRID_POINTS} points, got {}",
                self.grid_points
            )));
        }
        if !self.surface_bending.is_finite() {
            return Err(Error::invalid("surface bending must be finite"));
        }
        for d in &self.defects {
            d.validate(self.material.band_gap)?;
        }
        Ok(())
    }

    pub fn defect(&self, name: &str) -> Option<&DefectLevel> {
        self.defects.iter().find(|d| d.name == name)
    }
}

/// One side of a heterojunction before contact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionSide {
    pub bands: MaterialBands,
    /// Fermi level above the valence-band edge, eV.
    pub fermi_above_valence: f64,
}

impl JunctionSide {
    /// Vacuum level minus Fermi level.
    pub fn work_function(&self) -> f64 {
        self.bands.electron_affinity + self.bands.band_gap - self.fermi_above_valence
    }

    /// Nitrogen-rich diamond with its conduction band 1.5 eV below vacuum and
    /// the Fermi level 0.1 eV above the P1 level.
    pub fn nitrogen_diamond() -> Self {
        let bands = MaterialBands {
            electron_affinity: 1.5,
            ..MaterialBands::diamond()
        };
        Self {
            bands,
            fermi_above_valence: bands.band_gap - 1.7 + 0.1,
        }
    }

    /// Silica with the Fermi level 5.55 eV above its valence band.
    pub fn silica() -> Self {
        Self {
            bands: MaterialBands::silica(),
            fermi_above_valence: 5.55,
        }
    }
}

/// Fraction of the Fermi-level mismatch that drops on the diamond side by
/// default; reproduces +0.225 eV for the nitrogen-diamond/silica pair.
pub const DEFAULT_PARTITION: f64 = CORE_SHELL_SURFACE_BENDING / 1.45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionAlignment {
    /// Shell work function minus core work function, eV. Positive means
    /// electrons leave the core on contact.
    pub delta_ef: f64,
    /// Core-side bending, `partition · delta_ef`.
    pub bending: f64,
    pub partition: f64,
}

/// Aligns the Fermi levels of a core and its shell and assigns the fraction
/// `partition` of the mismatch to the core side.
pub fn align_heterojunction(core: &JunctionSide, shell: &JunctionSide, partition: f64) -> Result<JunctionAlignment> {
    if !(0.0..=1.0).contains(&partition) {
        return Err(Error::invalid(format!("partition fraction must be in [0, 1], got {partition}")));
    }
    let delta_ef = shell.work_function() - core.work_function();
    Ok(JunctionAlignment {
        delta_ef,
        bending: partition * delta_ef,
        partition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nitrogen_diamond_silica_mismatch() {
        let a = align_heterojunction(&JunctionSide::nitrogen_diamond(), &JunctionSide::silica(), DEFAULT_PARTITION)
            .unwrap();
        assert_relative_eq!(a.delta_ef, 1.45, max_relative = 1e-12);
        assert_relative_eq!(a.bending, 0.225, max_relative = 1e-12);
    }

    #[test]
    fn identical_sides_do_not_bend() {
        let s = JunctionSide::silica();
        let a = align_heterojunction(&s, &s, DEFAULT_PARTITION).unwrap();
        assert_eq!(a.delta_ef, 0.0);
        assert_eq!(a.bending, 0.0);
    }

    #[test]
    fn swapping_sides_flips_sign() {
        let d = JunctionSide::nitrogen_diamond();
        let s = JunctionSide::silica();
        let ab = align_heterojunction(&d, &s, 0.3).unwrap();
        let ba = align_heterojunction(&s, &d, 0.3).unwrap();
        assert_relative_eq!(ab.bending, -ba.bending, max_relative = 1e-14);
    }

    #[test]
    fn level_outside_gap_rejected() {
        let mut d = DefectLevel::p1(1e18);
        d.level = LevelPosition::BelowConduction(6.0);
        assert!(d.validate(5.5).is_err());
        assert!(BandConfig::flat().with_grid_points(50).validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = BandConfig::core_shell();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("below_conduction"));
        let back: BandConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}

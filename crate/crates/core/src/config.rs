//! The JSON run configuration shared by every CLI subcommand.
//!
//! One file may carry sections for several subcommands; each subcommand reads
//! only its own section plus the shared `seed` and `overrides`. Relative paths
//! are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bandbend::BandConfig;
use crate::bathsim::{DipolarBathConfig, PulseDephasingMode};
use crate::error::{Error, Result};
use crate::extract::Normalization;
use crate::spectra::NoiseSpectrum;

/// Version written to and required in every config file.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyze: Option<AnalyzeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_t1: Option<FitT1Config>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandbend: Option<BandbendConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unmix: Option<InputConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deer: Option<InputConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            overrides: Overrides::default(),
            simulate: None,
            analyze: None,
            fit_t1: None,
            classify: None,
            bandbend: None,
            unmix: None,
            deer: None,
        }
    }
}

/// Numeric knobs that replace built-in defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Calibration constant used by spectrum extraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// DQ transition angular frequency, rad/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_dq: Option<f64>,
    /// SQ transition angular frequency, rad/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_pulses: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depletion_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BathSpec {
    /// A named reference spectrum: `core-shell` or `bare`.
    Preset { name: String },
    Spectrum { spectrum: NoiseSpectrum },
    /// A single Lorentzian with spectral amplitude `delta` (rad/s).
    Ou { delta: f64, tau_c: f64 },
    /// Telegraph spins with dipolar couplings; Hahn echo only.
    Dipolar {
        bath: DipolarBathConfig,
        #[serde(default = "default_realizations")]
        realizations: usize,
    },
}

fn default_realizations() -> usize {
    2000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethod {
    /// Sampled bath trajectories.
    #[default]
    MonteCarlo,
    /// Noise-free `exp(−χ_exact)`.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGrid {
    /// Seconds, geometrically spaced.
    Log { start: f64, stop: f64, points: usize },
    Linear { start: f64, stop: f64, points: usize },
    List(Vec<f64>),
    /// Log-spaced multiples of the exact `T₂(N)` of a Gaussian bath.
    T2Relative { start: f64, stop: f64, points: usize },
}

impl TimeGrid {
    /// Times in seconds; `t2` is consulted only by [`TimeGrid::T2Relative`].
    pub fn times(&self, t2: impl FnOnce() -> Result<f64>) -> Result<Vec<f64>> {
        let spaced = |start: f64, stop: f64, points: usize, log: bool| -> Result<Vec<f64>> {
            if points < 2 || !(start > 0.0 && stop > start) {
                return Err(Error::invalid("time grid needs 0 < start < stop and at least 2 points"));
            }
            let last = (points - 1) as f64;
            Ok((0..points)
                .map(|i| {
                    let f = i as f64 / last;
                    if log {
                        start * (stop / start).powf(f)
                    } else {
                        start + f * (stop - start)
                    }
                })
                .collect())
        };
        match self {
            TimeGrid::Log { start, stop, points } => spaced(*start, *stop, *points, true),
            TimeGrid::Linear { start, stop, points } => spaced(*start, *stop, *points, false),
            TimeGrid::List(v) => {
                if v.is_empty() || v.iter().any(|t| !(*t > 0.0)) || v.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("time list must be positive and strictly increasing"));
                }
                Ok(v.clone())
            }
            TimeGrid::T2Relative { start, stop, points } => {
                let t2 = t2()?;
                spaced(start * t2, stop * t2, *points, true)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub bath: BathSpec,
    #[serde(default = "default_pulses")]
    pub pulses: Vec<u32>,
    pub times: TimeGrid,
    #[serde(default)]
    pub method: SimMethod,
    #[serde(default = "default_shots")]
    pub shots: usize,
    /// π-pulse duration, s.
    #[serde(default)]
    pub t_pi: f64,
    #[serde(default = "default_mode")]
    pub pulse_mode: PulseDephasingMode,
    /// OU components per decade used to realize a `1/f` term.
    #[serde(default = "default_per_decade")]
    pub per_decade: usize,
}

fn default_pulses() -> Vec<u32> {
    vec![1]
}

fn default_shots() -> usize {
    2000
}

fn default_mode() -> PulseDephasingMode {
    PulseDephasingMode::ZeroWidth
}

fn default_per_decade() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// A manifest written by `simulate`, or the directory holding one.
    pub input: PathBuf,
    /// Applied to every trace. When absent, traces produced by `simulate`
    /// are taken as coherences and all others are min/max rescaled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    #[serde(default = "default_lorentzians")]
    pub n_lorentzians: usize,
    #[serde(default)]
    pub white_floor: bool,
    /// `S` at the DQ frequency anchoring the `1/f` term, rad/s.
    #[serde(default = "default_s_dq")]
    pub s_dq: f64,
    /// Measured DQ rate `γ`, s⁻¹, added to the overview spectrum when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Measured SQ rate `Ω`, s⁻¹, added to the overview spectrum when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_rate: Option<f64>,
}

fn default_lorentzians() -> usize {
    2
}

fn default_s_dq() -> f64 {
    crate::spectra::reference::S_DQ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitT1Config {
    /// `t_s,signal` CSV of the SQ population difference.
    pub sq: PathBuf,
    /// `t_s,signal` CSV of the DQ population difference.
    pub dq: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Echo data as `t_s,c` or `t_s,chi`.
    pub input: PathBuf,
    /// Bath correlation time, s.
    pub tau_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandbendConfig {
    /// `flat`, `bare` or `core-shell`; ignored when `band` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<BandConfig>,
    /// Replaces the surface bending of the preset or band config, eV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_bending: Option<f64>,
}

impl BandbendConfig {
    pub fn resolve(&self) -> Result<BandConfig> {
        let mut cfg = match (&self.band, &self.preset) {
            (Some(b), _) => b.clone(),
            (None, Some(p)) => BandConfig::preset(p)?,
            (None, None) => return Err(Error::invalid("bandbend needs a preset or a band config")),
        };
        if let Some(b) = self.surface_bending {
            cfg.surface_bending = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub input: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Makes every relative input path relative to `base` instead.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(a) = &mut self.analyze {
            fix(&mut a.input);
        }
        if let Some(f) = &mut self.fit_t1 {
            fix(&mut f.sq);
            fix(&mut f.dq);
        }
        if let Some(c) = &mut self.classify {
            fix(&mut c.input);
        }
        if let Some(u) = &mut self.unmix {
            fix(&mut u.input);
        }
        if let Some(d) = &mut self.deer {
            fix(&mut d.input);
        }
    }
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or input error, 3 numerical
//! failure. Every output file starts with the provenance block (as `#`
//! comments in CSV, as a `provenance` object in JSON).

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, LevelFilter};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bandbend::{nv_stability_report, p1_depletion_report, solve_poisson, DEFAULT_DEPLETION_THRESHOLD};
use crate::bathsim::{dipolar_echo_ensemble, simulate_bath_trace, GaussianBath};
use crate::config::{
    BandbendConfig, BathSpec, ClassifyConfig, FitT1Config, InputConfig, RunConfig, SimMethod, SimulateConfig,
};
use crate::error::Error;
use crate::extract::{
    assemble_overview, extract_spectrum_with, log_bin, normalize_trace, write_spectrum_csv, Normalization,
    DEFAULT_BINS, DEFAULT_MIN_PULSES,
};
use crate::filterfn::{chi_exact, kappa, t2_for_pulses, DecouplingSequence};
use crate::fitkit::{
    classify_bath, fit_amplitude_monotone, fit_deer_fid, fit_noise_model, fit_power_law, fit_rate_equations,
    fit_stretched_exp, unmix_pl,
};
use crate::provenance::Provenance;
use crate::spectra::{reference, NoiseSpectrum};
use crate::trace::{read_columns, ChiCurve, CoherenceTrace, RelaxationKind, RelaxationTrace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Trace sources written by `simulate`; their values already are coherences.
const SIMULATED_SOURCES: [&str; 3] = ["exact", "simulated", "dipolar"];

/// Name of the manifest written by `simulate` and read by `analyze`.
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "nanodecoh", version, about = "Spin decoherence and noise spectroscopy toolkit")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Random seed; replaces the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate coherence traces (needs a `simulate` config section).
    Simulate,
    /// Extract and fit the noise spectrum of a simulated or measured dataset.
    Analyze {
        /// Manifest file or the directory that holds it.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fit SQ and DQ relaxation traces with the three-level rate equations.
    #[command(name = "fit-t1")]
    FitT1 {
        #[arg(long)]
        sq: Option<PathBuf>,
        #[arg(long)]
        dq: Option<PathBuf>,
    },
    /// Classify the bath from a Hahn-echo decay.
    Classify {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Bath correlation time, seconds.
        #[arg(long)]
        tau_c: Option<f64>,
    },
    /// Solve the radial band bending and report P1 depletion.
    Bandbend {
        /// flat, bare or core-shell.
        #[arg(long)]
        preset: Option<String>,
        /// Surface bending in eV, positive upward.
        #[arg(long, allow_hyphen_values = true)]
        surface_bending: Option<f64>,
    },
    /// Split a PL spectrum into NV⁰ and NV⁻ parts.
    Unmix {
        /// CSV with columns measured,nv0,nvm.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// DEER free-induction decay from the four-sequence raw signals.
    Deer {
        /// CSV with columns t_s,f1,f2,f3,f4.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Analyze { .. } => "analyze",
            Command::FitT1 { .. } => "fit-t1",
            Command::Classify { .. } => "classify",
            Command::Bandbend { .. } => "bandbend",
            Command::Unmix { .. } => "unmix",
            Command::Deer { .. } => "deer",
        }
    }
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Lib(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => {
                write!(f, "{e}")?;
                if let Error::Divergence { history, .. } = e {
                    if !history.is_empty() {
                        write!(f, "\nresidual history:")?;
                        for r in history {
                            write!(f, " {r:.3e}")?;
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.verbose { LevelFilter::Debug } else { LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// The configuration as written (hashed into provenance) and with its
/// relative paths resolved against the config file's directory.
struct Loaded {
    hashed: RunConfig,
    resolved: RunConfig,
}

fn load_config(cli: &Cli) -> CliResult<Loaded> {
    let (hashed, mut resolved) = match &cli.config {
        Some(path) => {
            if !path.is_file() {
                return Err(usage(format!("config file {} does not exist", path.display())));
            }
            let cfg = RunConfig::load(path)?;
            let mut resolved = cfg.clone();
            let base = path.parent().unwrap_or(Path::new("."));
            resolved.resolve_paths(base);
            (cfg, resolved)
        }
        None => (RunConfig::default(), RunConfig::default()),
    };
    let mut hashed = hashed;
    for cfg in [&mut hashed, &mut resolved] {
        apply_flags(cli, cfg);
    }
    Ok(Loaded { hashed, resolved })
}

/// Folds command-line values into the config; flags win.
fn apply_flags(cli: &Cli, cfg: &mut RunConfig) {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Simulate => {}
        Command::Analyze { input } => {
            if let Some(p) = input {
                match &mut cfg.analyze {
                    Some(a) => a.input = p.clone(),
                    None => {
                        cfg.analyze = serde_json::from_value(json!({ "input": p })).ok();
                    }
                }
            }
        }
        Command::FitT1 { sq, dq } => {
            let cur = cfg.fit_t1.clone();
            let sq = sq.clone().or(cur.as_ref().map(|c| c.sq.clone()));
            let dq = dq.clone().or(cur.as_ref().map(|c| c.dq.clone()));
            if let (Some(sq), Some(dq)) = (sq, dq) {
                cfg.fit_t1 = Some(FitT1Config { sq, dq });
            }
        }
        Command::Classify { input, tau_c } => {
            let cur = cfg.classify.clone();
            let input = input.clone().or(cur.as_ref().map(|c| c.input.clone()));
            let tau_c = tau_c.or(cur.as_ref().map(|c| c.tau_c));
            if let (Some(input), Some(tau_c)) = (input, tau_c) {
                cfg.classify = Some(ClassifyConfig { input, tau_c });
            }
        }
        Command::Bandbend {
            preset,
            surface_bending,
        } => {
            if preset.is_some() || surface_bending.is_some() {
                let b = cfg.bandbend.get_or_insert(BandbendConfig {
                    preset: None,
                    band: None,
                    surface_bending: None,
                });
                if preset.is_some() {
                    b.preset = preset.clone();
                }
                if surface_bending.is_some() {
                    b.surface_bending = *surface_bending;
                }
            }
        }
        Command::Unmix { input } => {
            if let Some(p) = input {
                cfg.unmix = Some(InputConfig { input: p.clone() });
            }
        }
        Command::Deer { input } => {
            if let Some(p) = input {
                cfg.deer = Some(InputConfig { input: p.clone() });
            }
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let loaded = load_config(cli)?;
    let prov = Provenance::new(cli.command.name(), &loaded.hashed)?;
    let cfg = &loaded.resolved;
    let out = &cli.out;
    match &cli.command {
        Command::Simulate => cmd_simulate(cfg, &loaded.hashed, out, &prov),
        Command::Analyze { .. } => cmd_analyze(cfg, out, &prov),
        Command::FitT1 { .. } => cmd_fit_t1(cfg, out, &prov),
        Command::Classify { .. } => cmd_classify(cfg, out, &prov),
        Command::Bandbend { .. } => cmd_bandbend(cfg, out, &prov),
        Command::Unmix { .. } => cmd_unmix(cfg, out, &prov),
        Command::Deer { .. } => cmd_deer(cfg, out, &prov),
    }
}

fn create_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::Lib(Error::Io(e)))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    info!("wrote {}", path.display());
    Ok(())
}

fn create_csv(path: &Path) -> CliResult<BufWriter<File>> {
    info!("writing {}", path.display());
    Ok(BufWriter::new(File::create(path)?))
}

fn open_input(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| {
        CliError::Lib(Error::Data(format!("cannot open {}: {e}", path.display())))
    })
}

/// One trace listed in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// File name relative to the manifest.
    pub file: String,
    pub n_pulses: u32,
    pub t_pi: f64,
    pub points: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub provenance: Provenance,
    pub config: RunConfig,
    pub traces: Vec<ManifestEntry>,
}

/// Seed of the pulse-count `n` trace, so traces of different `N` draw
/// independent streams.
fn trace_seed(seed: u64, n: u32) -> u64 {
    seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn bath_spectrum(spec: &BathSpec) -> CliResult<Option<NoiseSpectrum>> {
    Ok(match spec {
        BathSpec::Preset { name } => Some(match name.as_str() {
            "core-shell" | "core_shell" => reference::core_shell(),
            "bare" => reference::bare(),
            other => return Err(usage(format!("unknown bath preset '{other}' (core-shell or bare)"))),
        }),
        BathSpec::Spectrum { spectrum } => Some(spectrum.clone()),
        BathSpec::Ou { delta, tau_c } => {
            crate::spectra::LorentzianComponent::new(*delta, *tau_c)?;
            Some(NoiseSpectrum::lorentzian(*delta, *tau_c))
        }
        BathSpec::Dipolar { .. } => None,
    })
}

fn simulate_gaussian(
    sim: &SimulateConfig,
    spectrum: &NoiseSpectrum,
    n: u32,
    seed: u64,
) -> CliResult<CoherenceTrace> {
    spectrum.validate()?;
    let times = sim.times.times(|| t2_for_pulses(spectrum, n))?;
    let template = DecouplingSequence::for_pulses(n, times[0]).with_t_pi(sim.t_pi);
    match sim.method {
        SimMethod::Exact => {
            let samples = times
                .iter()
                .map(|&t| Ok((t, (-chi_exact(spectrum, &template.at_time(t))?).exp())))
                .collect::<crate::Result<Vec<_>>>()?;
            Ok(CoherenceTrace::new(n, sim.t_pi, samples)?.with_source("exact"))
        }
        SimMethod::MonteCarlo => {
            let t_min = times[0];
            let t_max = *times.last().expect("non-empty");
            let omega_lo = 1e-3 / t_max;
            let omega_hi = 1e3 * std::f64::consts::PI * n as f64 / t_min;
            let bath = GaussianBath::from_spectrum(spectrum, omega_lo, omega_hi, sim.per_decade)?;
            Ok(simulate_bath_trace(
                &bath,
                &template,
                &times,
                sim.pulse_mode,
                sim.shots,
                trace_seed(seed, n),
            )?)
        }
    }
}

fn cmd_simulate(cfg: &RunConfig, hashed: &RunConfig, out: &Path, prov: &Provenance) -> CliResult<()> {
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| usage("simulate needs a config with a 'simulate' section (--config)"))?;
    if sim.pulses.is_empty() {
        return Err(usage("simulate: 'pulses' is empty"));
    }
    let mut traces = Vec::new();
    match &sim.bath {
        BathSpec::Dipolar { bath, realizations } => {
            if sim.pulses != [1] {
                return Err(usage("the dipolar bath simulates Hahn echo only (pulses = [1])"));
            }
            let mut bath = bath.clone();
            bath.seed = cfg.seed;
            let times = sim
                .times
                .times(|| Err(Error::invalid("t2_relative times need a Gaussian bath")))?;
            let res = dipolar_echo_ensemble(&bath, &times, *realizations)?;
            traces.push(CoherenceTrace::new(1, sim.t_pi, res.coherence)?.with_source("dipolar"));
        }
        spec => {
            let spectrum = bath_spectrum(spec)?.expect("gaussian bath");
            for &n in &sim.pulses {
                traces.push(simulate_gaussian(sim, &spectrum, n, cfg.seed)?);
            }
        }
    }

    create_out(out)?;
    let comments = prov.comment_lines();
    let mut entries = Vec::new();
    for tr in &traces {
        let file = format!("trace_N{:04}.csv", tr.n_pulses);
        tr.write_csv(create_csv(&out.join(&file))?, &comments)?;
        entries.push(ManifestEntry {
            file,
            n_pulses: tr.n_pulses,
            t_pi: tr.t_pi,
            points: tr.len(),
            source: tr.source.clone(),
        });
    }
    let manifest = Manifest {
        provenance: prov.clone(),
        config: hashed.clone(),
        traces: entries,
    };
    write_json(&out.join(MANIFEST), &manifest)
}

/// Reads the manifest (or the manifest inside a directory) and its traces.
/// Every CSV next to the manifest must be listed in it.
fn load_dataset(input: &Path) -> CliResult<(PathBuf, Vec<(ManifestEntry, CoherenceTrace)>)> {
    let (dir, manifest_path) = if input.is_dir() {
        (input.to_path_buf(), input.join(MANIFEST))
    } else if input.is_file() {
        (input.parent().unwrap_or(Path::new(".")).to_path_buf(), input.to_path_buf())
    } else {
        return Err(usage(format!("input {} does not exist", input.display())));
    };
    let mut csvs: Vec<String> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    csvs.sort();
    if !manifest_path.is_file() {
        if csvs.is_empty() {
            return Err(usage(format!("input directory {} is empty", dir.display())));
        }
        return Err(CliError::Lib(Error::Data(format!(
            "no {MANIFEST} in {}; traces without metadata: {}",
            dir.display(),
            csvs.join(", ")
        ))));
    }
    let manifest: Manifest = serde_json::from_reader(open_input(&manifest_path)?).map_err(Error::from)?;
    let unlisted: Vec<&String> = csvs
        .iter()
        .filter(|c| !manifest.traces.iter().any(|e| &e.file == *c))
        .collect();
    if !unlisted.is_empty() {
        let names: Vec<&str> = unlisted.iter().map(|s| s.as_str()).collect();
        return Err(CliError::Lib(Error::Data(format!(
            "traces without metadata in {}: {}",
            manifest_path.display(),
            names.join(", ")
        ))));
    }
    if manifest.traces.is_empty() {
        return Err(usage(format!("{} lists no traces", manifest_path.display())));
    }
    let mut out = Vec::new();
    for e in &manifest.traces {
        let path = dir.join(&e.file);
        let mut tr = CoherenceTrace::read_csv(open_input(&path)?, e.n_pulses, e.t_pi)?;
        tr.source = e.source.clone();
        out.push((e.clone(), tr));
    }
    Ok((dir, out))
}

#[derive(Debug, Serialize)]
struct TraceFit {
    file: String,
    n_pulses: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<crate::fitkit::StretchedExpFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_analyze(cfg: &RunConfig, out: &Path, prov: &Provenance) -> CliResult<()> {
    let an = cfg
        .analyze
        .as_ref()
        .ok_or_else(|| usage("analyze needs --input or an 'analyze' config section"))?;
    let (_, dataset) = load_dataset(&an.input)?;
    let ov = &cfg.overrides;
    let k = ov.kappa.unwrap_or_else(kappa);
    let min_pulses = ov.min_pulses.unwrap_or(DEFAULT_MIN_PULSES);
    let bins = ov.bins.unwrap_or(DEFAULT_BINS);
    let omega_dq = ov.omega_dq.unwrap_or_else(reference::omega_dq);
    let omega_sq = ov.omega_sq.unwrap_or_else(reference::omega_sq);

    let traces = dataset
        .iter()
        .map(|(_, tr)| {
            let norm = an.normalization.unwrap_or(if SIMULATED_SOURCES.contains(&tr.source.as_str()) {
                Normalization::Identity
            } else {
                Normalization::MinMax
            });
            normalize_trace(tr, &norm)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let points = extract_spectrum_with(&traces, min_pulses, k)?;
    let binned = log_bin(&points, bins)?;
    let fit = fit_noise_model(&binned, (an.s_dq, omega_dq), an.n_lorentzians, an.white_floor)?;

    let extras = match (an.gamma, an.omega_rate) {
        (Some(g), Some(o)) => assemble_overview(&binned, (g, omega_dq), (o, omega_sq))?
            .into_iter()
            .filter(|p| p.source != crate::extract::PointSource::Cpmg)
            .collect(),
        _ => Vec::new(),
    };

    // Per-trace stretched exponentials and the N-scaling of T₂.
    let fits: Vec<TraceFit> = dataset
        .iter()
        .zip(&traces)
        .map(|((e, _), tr)| match fit_stretched_exp(tr) {
            Ok(f) => TraceFit {
                file: e.file.clone(),
                n_pulses: e.n_pulses,
                fit: Some(f),
                error: None,
            },
            Err(err) => TraceFit {
                file: e.file.clone(),
                n_pulses: e.n_pulses,
                fit: None,
                error: Some(err.to_string()),
            },
        })
        .collect();
    let t2_points: Vec<(u32, f64)> = fits
        .iter()
        .filter_map(|f| f.fit.as_ref().map(|x| (f.n_pulses, x.t2)))
        .collect();
    let power_law = match fit_power_law(&t2_points) {
        Ok(p) => json!(p),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let monotone = match fit_amplitude_monotone(&traces) {
        Ok(m) => json!(m),
        Err(e) => json!({ "error": e.to_string() }),
    };

    // Echo traces are classified against the slowest fitted correlation time.
    let tau_c = fit.components.first().map(|c| c.tau_c);
    let classifications: Vec<serde_json::Value> = dataset
        .iter()
        .zip(&traces)
        .filter(|((e, _), _)| e.n_pulses == 1)
        .map(|((e, _), tr)| {
            let result = match tau_c {
                Some(tc) => match classify_bath(&ChiCurve::from_coherence(tr), tc) {
                    Ok(c) => json!(c),
                    Err(err) => json!({ "error": err.to_string() }),
                },
                None => json!({ "error": "noise fit has no Lorentzian correlation time" }),
            };
            json!({ "file": e.file, "tau_c": tau_c, "classification": result })
        })
        .collect();

    create_out(out)?;
    let comments = prov.comment_lines();
    write_spectrum_csv(create_csv(&out.join("spectrum.csv"))?, &binned, &extras, &comments)?;
    write_json(
        &out.join("noise_fit.json"),
        &json!({
            "provenance": prov,
            "kappa": k,
            "min_pulses": min_pulses,
            "bins": bins,
            "spectrum_points": points.len(),
            "fit": fit,
        }),
    )?;
    write_json(
        &out.join("stretched_fits.json"),
        &json!({
            "provenance": prov,
            "traces": fits,
            "power_law": power_law,
            "amplitude_monotone": monotone,
        }),
    )?;
    write_json(
        &out.join("classification.json"),
        &json!({ "provenance": prov, "echo_traces": classifications }),
    )
}

fn cmd_fit_t1(cfg: &RunConfig, out: &Path, prov: &Provenance) -> CliResult<()> {
    let f = cfg
        .fit_t1
        .as_ref()
        .ok_or_else(|| usage("fit-t1 needs --sq and --dq (or a 'fit_t1' config section)"))?;
    let sq = RelaxationTrace::read_csv(open_input(&f.sq)?, RelaxationKind::Sq)?;
    let dq = RelaxationTrace::read_csv(open_input(&f.dq)?, RelaxationKind::Dq)?;
    let fit = fit_rate_equations(&sq, &dq)?;
    create_out(out)?;
    write_json(&out.join("rates.json"), &json!({ "provenance": prov, "fit": fit }))
}

/// Reads `t_s,chi` or `t_s,c` echo data as a χ curve.
fn read_echo(path: &Path) -> CliResult<ChiCurve> {
    let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let header = text
        .lines()
        .find(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .unwrap_or("");
    if header.split(',').any(|h| h.trim() == "chi") {
        Ok(ChiCurve::read_csv(text.as_bytes(), 1)?)
    } else {
        Ok(ChiCurve::from_coherence(&CoherenceTrace::read_csv(text.as_bytes(), 1, 0.0)?))
    }
}

fn cmd_classify(cfg: &RunConfig, out: &Path, prov: &Provenance) -> CliResult<()> {
    let c = cfg
        .classify
        .as_ref()
        .ok_or_else(|| usage("classify needs --input and --tau-c (or a 'classify' config section)"))?;
    let echo = read_echo(&c.input)?;
    let result = classify_bath(&echo, c.tau_c)?;
    create_out(out)?;
    write_json(
        &out.join("classification.json"),
        &json!({ "provenance": prov, "tau_c": c.tau_c, "classification": result }),
    )
}

fn cmd_bandbend(cfg: &RunConfig, out: &Path, prov: &Provenance) -> CliResult<()> {
    let b = cfg
        .bandbend
        .as_ref()
        .ok_or_else(|| usage("bandbend needs --preset or a 'bandbend' config section"))?;
    let band = b.resolve()?;
    let threshold = cfg.overrides.depletion_threshold.unwrap_or(DEFAULT_DEPLETION_THRESHOLD);
    let profile = solve_poisson(&band)?;
    let depletion = p1_depletion_report(&profile, "P1", threshold)?;
    let nv_change = nv_stability_report(&profile)?;
    create_out(out)?;
    profile.write_csv(create_csv(&out.join("profile.csv"))?, &prov.comment_lines())?;
    write_json(
        &out.join("bandbend_report.json"),
        &json!({
            "provenance": prov,
            "band_config": band,
            "fermi_above_valence_eV": profile.fermi_above_valence,
            "iterations": profile.iterations,
            "residual_norm": profile.residual_norm,
            "gauss_closure": profile.gauss_closure,
            "depletion_width_nm": depletion.width_nm,
            "p1_reduction": depletion.reduction,
            "nv_change": nv_change,
            "depletion": depletion,
        }),
    )
}

fn cmd_unmix(cfg: &RunConfig, out: &Path, prov: &Provenance) -> CliResult<()> {
    let u = cfg
        .unmix
        .as_ref()
        .ok_or_else(|| usage("unmix needs --input (CSV with measured,nv0,nvm)"))?;
    let rows = read_columns(open_input(&u.input)?, &["measured", "nv0", "nvm"], None)?;
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<_>>();
    let result = unmix_pl(&col(0), &col(1), &col(2))?;
    create_out(out)?;
    write_json(&out.join("unmix.json"), &json!({ "provenance": prov, "result": result }))
}

fn cmd_deer(cfg: &RunConfig, out: &Path, prov: &Provenance) -> CliResult<()> {
    let d = cfg
        .deer
        .as_ref()
        .ok_or_else(|| usage("deer needs --input (CSV with t_s,f1,f2,f3,f4)"))?;
    let rows = read_columns(open_input(&d.input)?, &["t_s", "f1", "f2", "f3", "f4"], None)?;
    let rows: Vec<_> = rows.iter().map(|r| (r[0], r[1], r[2], r[3], r[4])).collect();
    let (series, fit) = fit_deer_fid(&rows)?;
    create_out(out)?;
    let mut w = create_csv(&out.join("deer_fid.csv"))?;
    crate::trace::write_comments(&mut w, &prov.comment_lines())?;
    writeln!(w, "t_s,signal")?;
    for (t, s) in &series {
        writeln!(w, "{},{}", crate::trace::fmt(*t), crate::trace::fmt(*s))?;
    }
    w.flush()?;
    write_json(&out.join("deer_fit.json"), &json!({ "provenance": prov, "fit": fit }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(usage("x").exit_code(), EXIT_USAGE);
        assert_eq!(CliError::Lib(Error::Data("x".into())).exit_code(), EXIT_DATA);
        assert_eq!(CliError::Lib(Error::Fit("x".into())).exit_code(), EXIT_NUMERICAL);
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(["nanodecoh", "frobnicate"]), EXIT_USAGE);
    }

    #[test]
    fn trace_seeds_differ_by_pulse_count() {
        assert_ne!(trace_seed(1, 64), trace_seed(1, 128));
        assert_eq!(trace_seed(1, 64), trace_seed(1, 64));
    }

    #[test]
    fn divergence_message_lists_history() {
        let e = CliError::Lib(Error::Divergence {
            iterations: 3,
            residual: 1.0,
            message: "m".into(),
            history: vec![2.0, 1.0],
        });
        let s = e.to_string();
        assert!(s.contains("residual history: 2.000e0 1.000e0"), "{s}");
        assert_eq!(e.exit_code(), EXIT_NUMERICAL);
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nanodecoh"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn nanodecoh")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

const MC_CONFIG: &str = r#"{
  "schema_version": 1,
  "seed": 77,
  "simulate": {
    "bath": { "kind": "preset", "name": "core-shell" },
    "pulses": [128, 256, 512],
    "times": { "t2_relative": { "start": 0.3, "stop": 2.0, "points": 12 } },
    "shots": 400
  }
}"#;

#[test]
fn simulate_then_analyze_is_byte_identical_for_equal_seeds() {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("sim.json"), MC_CONFIG);
        let o = run(dir.path(), &["simulate", "--config", "sim.json", "--out", "sim"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = run(
            dir.path(),
            &["analyze", "--input", "sim", "--out", "fit", "--config", "sim.json"],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let mut files = Vec::new();
        for sub in ["sim", "fit"] {
            let mut names: Vec<_> = fs::read_dir(dir.path().join(sub))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            names.sort();
            for p in names {
                let rel = p.strip_prefix(dir.path()).unwrap().to_path_buf();
                files.push((rel, fs::read(&p).unwrap()));
            }
        }
        outputs.push((dir, files));
    }
    let (a, b) = (&outputs[0].1, &outputs[1].1);
    assert_eq!(a.len(), b.len());
    assert!(a.len() >= 8);
    for ((pa, ca), (pb, cb)) in a.iter().zip(b) {
        assert_eq!(pa, pb);
        assert!(ca == cb, "{} differs between runs", pa.display());
    }
}

#[test]
fn different_seeds_change_monte_carlo_traces() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("sim.json"), MC_CONFIG);
    for (seed, out) in [("1", "a"), ("2", "b")] {
        let o = run(dir.path(), &["simulate", "--config", "sim.json", "--seed", seed, "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a/trace_N0128.csv")).unwrap();
    let b = fs::read(dir.path().join("b/trace_N0128.csv")).unwrap();
    assert_ne!(a, b);
    let m = json(&dir.path().join("b/manifest.json"));
    assert_eq!(m["provenance"]["seed"], 2);
    assert_eq!(m["config"]["seed"], 2);
}

#[test]
fn ou_simulation_writes_traces_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("ou.json"),
        r#"{
          "schema_version": 1,
          "seed": 9,
          "simulate": {
            "bath": { "kind": "ou", "delta": 2e6, "tau_c": 1e-6 },
            "pulses": [1, 64],
            "times": { "log": { "start": 1e-7, "stop": 2e-5, "points": 8 } },
            "shots": 300
          }
        }"#,
    );
    let o = run(dir.path(), &["simulate", "--config", "ou.json", "--out", "o"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = json(&dir.path().join("o/manifest.json"));
    assert_eq!(m["provenance"]["seed"], 9);
    let traces = m["traces"].as_array().unwrap();
    assert_eq!(traces.len(), 2);
    for t in traces {
        let text = fs::read_to_string(dir.path().join("o").join(t["file"].as_str().unwrap())).unwrap();
        assert!(text.starts_with("# tool: nanodecoh"));
        assert!(text.contains("\nt_s,c,stderr\n"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 9);
    }
}

#[test]
fn zero_coupling_gives_unit_traces() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("zero.json"),
        r#"{
          "schema_version": 1,
          "simulate": {
            "bath": { "kind": "ou", "delta": 0.0, "tau_c": 1e-6 },
            "pulses": [1, 16],
            "times": { "list": [1e-6, 2e-6, 5e-6] },
            "shots": 100
          }
        }"#,
    );
    let o = run(dir.path(), &["simulate", "--config", "zero.json", "--out", "z"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["z/trace_N0001.csv", "z/trace_N0016.csv"] {
        let tr = nanodecoh::trace::CoherenceTrace::read_csv(
            fs::File::open(dir.path().join(f)).unwrap(),
            1,
            0.0,
        )
        .unwrap();
        assert!(tr.samples.iter().all(|&(_, c)| c == 1.0));
    }
}

#[test]
fn bundled_dataset_fits_well() {
    let dir = tempfile::tempdir().unwrap();
    let input = data("core_shell");
    let o = run(dir.path(), &["analyze", "--input", input.to_str().unwrap(), "--out", "fit"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = json(&dir.path().join("fit/noise_fit.json"));
    assert!(fit["fit"]["r_squared"].as_f64().unwrap() >= 0.9);
    assert!(fit["provenance"]["config_sha256"].as_str().unwrap().len() == 64);
    for f in ["stretched_fits.json", "classification.json"] {
        assert!(json(&dir.path().join("fit").join(f))["provenance"].is_object());
    }
    let spectrum = fs::read_to_string(dir.path().join("fit/spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("# tool: nanodecoh"));
    assert!(spectrum.contains("omega_rad_s,S_rad_s,stderr,count,source"));
}

#[test]
fn analyze_without_cpmg_traces_reports_rule() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("low.json"),
        r#"{
          "schema_version": 1,
          "simulate": {
            "bath": { "kind": "preset", "name": "core-shell" },
            "pulses": [1, 16, 64],
            "times": { "t2_relative": { "start": 0.3, "stop": 2.0, "points": 8 } },
            "method": "exact"
          }
        }"#,
    );
    assert_eq!(code(&run(dir.path(), &["simulate", "--config", "low.json", "--out", "low"])), 0);
    let o = run(dir.path(), &["analyze", "--input", "low", "--out", "fit"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no CPMG points retained"), "{}", stderr(&o));
}

#[test]
fn empty_input_directory_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let o = run(dir.path(), &["analyze", "--input", "empty"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn traces_without_metadata_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let src = data("core_shell");
    let dst = dir.path().join("ds");
    fs::create_dir(&dst).unwrap();
    for e in fs::read_dir(&src).unwrap() {
        let p = e.unwrap().path();
        fs::copy(&p, dst.join(p.file_name().unwrap())).unwrap();
    }
    write(&dst.join("stray_run.csv"), "t_s,c\n1e-6,0.5\n");
    let o = run(dir.path(), &["analyze", "--input", "ds"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("stray_run.csv"), "{}", stderr(&o));

    fs::remove_file(dst.join("manifest.json")).unwrap();
    let o = run(dir.path(), &["analyze", "--input", "ds"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("trace_N0128.csv"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["simulate"])), 1);
    assert_eq!(code(&run(dir.path(), &["bogus"])), 1);
    assert_eq!(code(&run(dir.path(), &["classify", "--input", "x.csv"])), 1);
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
}

#[test]
fn bad_config_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("v2.json"), r#"{"schema_version": 2}"#);
    let o = run(dir.path(), &["bandbend", "--config", "v2.json", "--preset", "flat"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("schema_version"));
}

fn bandbend_report(preset_file: &str) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data(preset_file);
    let o = run(dir.path(), &["bandbend", "--config", cfg.to_str().unwrap(), "--out", "b"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let profile = fs::read_to_string(dir.path().join("b/profile.csv")).unwrap();
    assert!(profile.starts_with("# tool: nanodecoh"));
    assert!(profile.contains("r_nm,phi_eV,Ec_eV,Ev_eV,P1_neutral_cm3"));
    json(&dir.path().join("b/bandbend_report.json"))
}

#[test]
fn bandbend_presets() {
    let flat = bandbend_report("bandbend_flat.json");
    assert_eq!(flat["depletion_width_nm"], 0.0);
    assert_eq!(flat["p1_reduction"], 0.0);
    assert_eq!(flat["nv_change"], 0.0);

    let bare = bandbend_report("bandbend_bare.json");
    assert_eq!(bare["p1_reduction"], 0.0);

    let cs = bandbend_report("bandbend_core_shell.json");
    let red = cs["p1_reduction"].as_f64().unwrap();
    assert!(red > 0.0 && red < 1.0);
    assert!(cs["gauss_closure"].as_f64().unwrap() < 1e-3);
    assert!(cs["nv_change"].as_f64().unwrap().abs() < 0.1);
}

#[test]
fn bandbend_flags_override_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["bandbend", "--preset", "flat", "--surface-bending", "-0.3", "--out", "b"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&dir.path().join("b/bandbend_report.json"));
    assert_eq!(r["band_config"]["surface_bending"], -0.3);
}

#[test]
fn fit_t1_recovers_rates() {
    let dir = tempfile::tempdir().unwrap();
    let (omega, gamma) = (120.0, 450.0);
    let (r_sq, r_dq) = nanodecoh::fitkit::rates::relaxation_rates(omega, gamma);
    let mut sq = String::from("t_s,signal\n");
    let mut dq = String::from("t_s,signal\n");
    for i in 0..40 {
        let t = 2e-5 * 1.2f64.powi(i);
        sq += &format!("{t:e},{:e}\n", (-r_sq * t).exp());
        dq += &format!("{t:e},{:e}\n", (-r_dq * t).exp());
    }
    write(&dir.path().join("sq.csv"), &sq);
    write(&dir.path().join("dq.csv"), &dq);
    let o = run(dir.path(), &["fit-t1", "--sq", "sq.csv", "--dq", "dq.csv", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = json(&dir.path().join("r/rates.json"));
    let got = fit["fit"]["rates"]["omega_sq_rate"].as_f64().unwrap();
    assert!((got - omega).abs() / omega < 1e-6, "{got}");
}

#[test]
fn unmix_and_deer_commands() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("wavelength_nm,measured,nv0,nvm\n");
    for i in 0..50 {
        let x = i as f64 / 49.0;
        let nv0 = (-(x - 0.3).powi(2) / 0.01).exp() + 0.01;
        let nvm = (-(x - 0.6).powi(2) / 0.02).exp() + 0.01;
        csv += &format!("{},{},{},{}\n", 600 + i, 0.71 * nv0 + 0.29 * nvm, nv0, nvm);
    }
    write(&dir.path().join("pl.csv"), &csv);
    let o = run(dir.path(), &["unmix", "--input", "pl.csv", "--out", "u"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(json(&dir.path().join("u/unmix.json"))["result"]["nvm_fraction"].is_number());

    let mut deer = String::from("t_s,f1,f2,f3,f4\n");
    for i in 0..20 {
        let t = 1e-7 * (i + 1) as f64;
        let s = 0.3 * (-t / 8e-7).exp();
        // S_E = 0.5, S_D = 0.5·s
        let (f3, f4) = (1.5, 0.5);
        let (f1, f2) = (1.0 + 0.5 * s, 1.0 - 0.5 * s);
        deer += &format!("{t:e},{f1},{f2},{f3},{f4}\n");
    }
    write(&dir.path().join("deer.csv"), &deer);
    let o = run(dir.path(), &["deer", "--input", "deer.csv", "--out", "d"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = json(&dir.path().join("d/deer_fit.json"));
    let rate = fit["fit"]["rate"].as_f64().unwrap();
    assert!((rate - 1.25e6).abs() / 1.25e6 < 1e-6, "{rate}");
    let series = fs::read_to_string(dir.path().join("d/deer_fid.csv")).unwrap();
    assert!(series.contains("\nt_s,signal\n"));
}

#[test]
fn classify_reads_chi_or_coherence() {
    let dir = tempfile::tempdir().unwrap();
    let tau_c = 1e-7;
    let mut chi = String::from("t_s,chi\n");
    let mut coh = String::from("t_s,c\n");
    for i in 0..30 {
        let t = 2e-6 * 1.15f64.powi(i);
        let x = 0.02 * (t / 1e-6);
        chi += &format!("{t:e},{x:e}\n");
        coh += &format!("{t:e},{:e}\n", (-x).exp());
    }
    write(&dir.path().join("chi.csv"), &chi);
    write(&dir.path().join("coh.csv"), &coh);
    for f in ["chi.csv", "coh.csv"] {
        let out = format!("out_{f}");
        let o = run(dir.path(), &["classify", "--input", f, "--tau-c", &tau_c.to_string(), "--out", &out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let c = json(&dir.path().join(&out).join("classification.json"));
        let n = c["classification"]["n_rw"]["value"].as_f64().unwrap();
        assert!((n - 1.0).abs() < 1e-6, "{f}: {n}");
        assert_eq!(c["classification"]["verdict"], "fixed-markovian");
    }
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emech::backaction::PumpModel;
use emech::cooling::cooling_curve;
use emech::spectrum::{rwa_rates_from_full, spectrum_rwa, FullParams, SpectrumNoise};
use emech::system::{dbm_to_watts, hz_to_angular, thermal_occupation};
use serde_json::Value;
use tempfile::TempDir;

const DEVICE: &str = "
[cavity]
frequency_hz = 8.350e9
kappa_hz = 226e3
kappa_ex_hz = 183e3

[mechanics]
frequency_hz = 1.486e6
gamma_hz = 1.0e-3

[environment]
temperature_k = 0.080

[coupling]
g_hz = 336.2

[noise]
n_tilde_quanta = 0.2
";

fn emech(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emech"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(p: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn derived(r: &Value, name: &str) -> f64 {
    r["derived"]
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["name"] == name)
        .unwrap_or_else(|| panic!("no derived `{name}` in {r:#}"))["value"]
        .as_f64()
        .unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn lorentzian_spectrum_fits() {
    let d = TempDir::new().unwrap();
    let mut s = String::from("frequency_hz,psd_quanta\n");
    for k in 0..401 {
        let f = -2.0 + 4.0 * k as f64 / 400.0;
        let l = 3.0 * (0.1 / std::f64::consts::PI) / (f * f + 0.01);
        s.push_str(&format!("{f},{}\n", l + 0.5));
    }
    write(d.path(), "peak.csv", &s);
    let o = emech(d.path(), &["fit", "spectrum", "peak.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(d.path().join("peak.spectrum.json"));
    assert_eq!(r["status"], "ok");
    assert!((derived(&r, "gamma_eff") - 0.2).abs() < 1e-6);
    let area = r["fits"][0]["report"]["parameters"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == "area")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((area - 3.0).abs() < 1e-6);
}

#[test]
fn malformed_csv_exits_1_with_line() {
    let d = TempDir::new().unwrap();
    write(d.path(), "bad.csv", "frequency_hz,psd_quanta\n1,2\n2,abc\n3,4\n");
    let o = emech(d.path(), &["fit", "spectrum", "bad.csv"]);
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    assert!(e.contains("bad.csv") && e.contains("line 3"), "{e}");
}

#[test]
fn flat_spectrum_exits_2_with_diagnostics() {
    let d = TempDir::new().unwrap();
    let mut s = String::from("frequency_hz,psd_quanta\n");
    for k in 0..200 {
        s.push_str(&format!("{k},1.0\n"));
    }
    write(d.path(), "flat.csv", &s);
    let o = emech(d.path(), &["fit", "spectrum", "flat.csv"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let r = json(d.path().join("flat.spectrum.json"));
    assert_eq!(r["status"], "fit_failed");
    assert!(!r["diagnostics"].as_array().unwrap().is_empty());
}

#[test]
fn input_error_outranks_numerical_in_a_batch() {
    let d = TempDir::new().unwrap();
    let mut s = String::from("frequency_hz,psd_quanta\n");
    for k in 0..200 {
        s.push_str(&format!("{k},1.0\n"));
    }
    write(d.path(), "a.csv", &s);
    write(d.path(), "b.csv", "frequency_hz\n");
    let o = emech(d.path(), &["fit", "spectrum", "b.csv", "a.csv"]);
    assert_eq!(code(&o), 1);
    // the good-but-unfittable file still gets its report
    assert!(d.path().join("a.spectrum.json").is_file());
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let d = TempDir::new().unwrap();
    write(d.path(), "c.toml", "[cavity]\nfrequency = 8e9\n");
    let o = emech(d.path(), &["--config", "c.toml", "simulate", "spectrum"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
}

#[test]
fn simulated_spectrum_matches_library() {
    let d = TempDir::new().unwrap();
    write(d.path(), "c.toml", DEVICE);
    let o = emech(d.path(), &["--config", "c.toml", "--out", "o", "simulate", "spectrum"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&std::fs::read_to_string(d.path().join("o/spectrum.csv")).unwrap());
    assert_eq!(rows.len(), 801);

    let omega_m = hz_to_angular(1.486e6);
    let p = FullParams {
        kappa: hz_to_angular(226e3),
        kappa_ex: hz_to_angular(183e3),
        delta: -omega_m,
        omega_m,
        g: hz_to_angular(336.2),
        gamma_m: hz_to_angular(1e-3),
    };
    let noise = SpectrumNoise {
        n_th: thermal_occupation(0.080, omega_m).unwrap(),
        n_tilde: 0.2,
        n_add: 0.0,
    };
    let rates = rwa_rates_from_full(&p).unwrap();
    let freqs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let lib = spectrum_rwa(&freqs, &rates, &noise).unwrap().values().to_vec();
    for (r, v) in rows.iter().zip(&lib) {
        assert!((r[1] - v).abs() <= 1e-12 * v.abs(), "{} vs {v}", r[1]);
    }
}

#[test]
fn same_seed_same_bytes() {
    let d = TempDir::new().unwrap();
    write(
        d.path(),
        "c.toml",
        "[simulate.ringdown]
excite_duration_s = 2.0
amplify_duration_s = 3.0
decay_duration_s = 20.0
excite_rate_per_s = 1.0
gamma_blue_hz = 0.05
gamma_red_hz = 0.1
sample_rate_hz = 20.0
noise_std = 0.05
",
    );
    let run = |out: &str, seed: &str| {
        let o = emech(d.path(), &["--config", "c.toml", "--seed", seed, "--out", out, "simulate", "ringdown"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(d.path().join(out).join("ringdown.csv")).unwrap()
    };
    let a = run("a", "11");
    let b = run("b", "11");
    let c = run("c", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn simulated_ringdown_fits_back() {
    let d = TempDir::new().unwrap();
    write(
        d.path(),
        "c.toml",
        "[mechanics]
frequency_hz = 1.486e6

[simulate.ringdown]
excite_duration_s = 2.0
amplify_duration_s = 3.0
decay_duration_s = 40.0
excite_rate_per_s = 1.0
gamma_blue_hz = 0.05
gamma_red_hz = 0.02
sample_rate_hz = 20.0
",
    );
    let o = emech(d.path(), &["--config", "c.toml", "simulate", "ringdown"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = emech(d.path(), &["--config", "c.toml", "fit", "ringdown", "ringdown.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(d.path().join("ringdown.ringdown.json"));
    let gamma = r["fits"][0]["report"]["parameters"][0]["value"].as_f64().unwrap();
    assert!((gamma - 0.02).abs() / 0.02 < 1e-3, "{gamma}");
}

#[test]
fn trajectory_then_fit_recovers_linewidth() {
    let d = TempDir::new().unwrap();
    write(
        d.path(),
        "c.toml",
        "[simulate.trajectory]
gamma_eff_hz = 0.1
occupation_quanta = 100.0
sample_rate_hz = 10.0
duration_s = 40000.0
segment_s = 400.0
",
    );
    let o = emech(d.path(), &["--config", "c.toml", "--seed", "3", "simulate", "trajectory"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = emech(d.path(), &["fit", "spectrum", "trajectory_psd.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(d.path().join("trajectory_psd.spectrum.json"));
    let g = derived(&r, "gamma_eff");
    assert!((g - 0.1).abs() / 0.1 < 0.05, "{g}");
}

const COOLING: &str = "
[pump]
gamma_m_hz = 1.0e-3
p0_dbm = -38.7
";

fn synthetic_sweep(q: f64) -> String {
    let n_th = 1121.0;
    let p0 = dbm_to_watts(-38.7).unwrap();
    let model = PumpModel::new(hz_to_angular(1e-3), p0).unwrap();
    let dbm: Vec<f64> = (0..=60).map(|k| -19.0 + 0.5 * k as f64).collect();
    let powers: Vec<f64> = dbm.iter().map(|&d| dbm_to_watts(d).unwrap()).collect();
    let curve = cooling_curve(&powers, &model, n_th, 1.288e-4 / p0).unwrap();
    let mut s = String::from("power_dbm,area,area_err\n");
    for (d, pt) in dbm.iter().zip(&curve.points) {
        let area = pt.n_bar / q;
        s.push_str(&format!("{d},{area},{}\n", 0.02 * area));
    }
    s
}

#[test]
fn cooling_curve_from_sweep() {
    let d = TempDir::new().unwrap();
    let q = 0.05;
    write(d.path(), "c.toml", &format!("{COOLING}\n[calibration]\nquanta_per_area = {q}\nquanta_per_area_std = 0.001\n"));
    write(d.path(), "sweep.csv", &synthetic_sweep(q));
    let o = emech(d.path(), &["--config", "c.toml", "--plot", "svg", "cooling-curve", "sweep.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(d.path().join("cooling_curve.json"));
    let n = derived(&r, "n_bar_min");
    let p = derived(&r, "optimal_power");
    assert!((n - 0.76).abs() <= 0.05, "{n}");
    assert!((p + 4.0).abs() <= 0.5, "{p}");
    assert!(d.path().join("cooling_curve.svg").is_file());
}

#[test]
fn cooling_curve_from_thermal_report() {
    let d = TempDir::new().unwrap();
    let q = 0.05;
    let report = format!(
        r#"{{"command":"fit thermal","status":"ok","inputs":[],"digest":"",
        "derived":[{{"name":"quanta_per_area","value":{q},"std_error":0.001,"unit":"quanta","operation":"x","inputs":[]}}]}}"#
    );
    write(d.path(), "thermal.json", &report);
    write(d.path(), "c.toml", &format!("{COOLING}\n[calibration]\nthermal_report = \"thermal.json\"\n"));
    write(d.path(), "sweep.csv", &synthetic_sweep(q));
    let o = emech(d.path(), &["--config", "c.toml", "cooling-curve", "sweep.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(d.path().join("cooling_curve.json"));
    assert!((derived(&r, "n_bar_min") - 0.76).abs() <= 0.05);
    // config, sweep and calibration report are all fingerprinted
    assert_eq!(r["inputs"].as_array().unwrap().len(), 3);
}

#[test]
fn cooling_curve_without_calibration_exits_1() {
    let d = TempDir::new().unwrap();
    write(d.path(), "c.toml", COOLING);
    write(d.path(), "sweep.csv", &synthetic_sweep(0.05));
    let o = emech(d.path(), &["--config", "c.toml", "cooling-curve", "sweep.csv"]);
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    assert!(e.contains("quanta_per_area") && e.contains("[calibration]"), "{e}");
}

#[test]
fn model_cooling_curve_without_cavity_noise_is_monotone() {
    let d = TempDir::new().unwrap();
    write(
        d.path(),
        "c.toml",
        &format!("{COOLING}\n[cooling]\nn_th_quanta = 1121.0\np_min_dbm = -30.0\np_max_dbm = 10.0\npoints = 81\n"),
    );
    let o = emech(d.path(), &["--config", "c.toml", "cooling-curve"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&std::fs::read_to_string(d.path().join("cooling_model.csv")).unwrap());
    assert_eq!(rows.len(), 81);
    assert!(rows.windows(2).all(|w| w[1][3] < w[0][3]));
}

#[test]
fn report_reproduces_device_figures() {
    let d = TempDir::new().unwrap();
    write(d.path(), "device.toml", DEVICE);
    let o = emech(d.path(), &["report", "device.toml"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(d.path().join("summary.json"));
    assert!((derived(&r, "quality_factor") - 1.486e9).abs() / 1.486e9 < 1e-9);
    assert!((derived(&r, "eta") - 0.81).abs() < 0.005);
    assert!((derived(&r, "coherence_time") - 0.142).abs() < 0.001);
    assert!(r["warnings"].as_array().unwrap().is_empty());
    let params = r["parameters"].as_array().unwrap();
    let kappa = params.iter().find(|p| p["name"] == "cavity.kappa_hz").unwrap();
    assert_eq!(kappa["unit"], "Hz");
    assert_eq!(kappa["source"], "device.toml");
}

#[test]
fn report_without_inputs_exits_1() {
    let d = TempDir::new().unwrap();
    let o = emech(d.path(), &["report"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no inputs"));
}

#[test]
fn report_warns_on_conflicts_naming_both_sources() {
    let d = TempDir::new().unwrap();
    write(d.path(), "a.toml", DEVICE);
    write(d.path(), "b.toml", "[mechanics]\nfrequency_hz = 1.486e6\ngamma_hz = 2.0e-3\n");
    let o = emech(d.path(), &["report", "b.toml", "a.toml"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(d.path().join("summary.json"));
    let w: Vec<&str> = r["warnings"].as_array().unwrap().iter().map(|w| w.as_str().unwrap()).collect();
    assert_eq!(w.len(), 1, "{w:?}");
    assert!(w[0].contains("mechanics.gamma_hz") && w[0].contains("a.toml") && w[0].contains("b.toml"));
    // sorted order: a.toml wins
    assert!((derived(&r, "quality_factor") - 1.486e9).abs() < 1.0);
}

#[test]
fn report_digest_tracks_inputs() {
    let d = TempDir::new().unwrap();
    write(d.path(), "t.toml", DEVICE);
    emech(d.path(), &["--out", "a", "report", "t.toml"]);
    let first = json(d.path().join("a/summary.json"))["digest"].clone();
    emech(d.path(), &["--out", "b", "report", "t.toml"]);
    assert_eq!(first, json(d.path().join("b/summary.json"))["digest"]);
    write(d.path(), "t.toml", &DEVICE.replace("0.080", "0.081"));
    emech(d.path(), &["--out", "c", "report", "t.toml"]);
    assert_ne!(first, json(d.path().join("c/summary.json"))["digest"]);
}

#[test]
fn json_format_writes_json_tables() {
    let d = TempDir::new().unwrap();
    write(d.path(), "c.toml", DEVICE);
    let o = emech(d.path(), &["--config", "c.toml", "--format", "json", "--plot", "png", "simulate", "spectrum"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("spectrum.json")).unwrap()).unwrap();
    assert!(v.is_object());
    assert!(d.path().join("spectrum.png").is_file());
}

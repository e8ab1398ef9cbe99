use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::ValueEnum;
use rayon::prelude::*;

use emech::estimate::{
    fit_affine, fit_exponential_decay, fit_gamma_vs_power, fit_lorentzian, fit_s11,
    fit_tls_power_law, gorodetsky_g0, s11_model, thermal_calibration, ReflectionData,
    ReflectionTrace, ThermalOptions, ThermalPoint, Unit, DEFAULT_THERMALIZATION_THRESHOLD,
};
use emech::system::{dbm_to_watts, hz_to_angular, watts_to_dbm, CavityParams};
use emech::table::Table;
use emech::timedomain::instantaneous_frequency;
use emech::trace::{SpectrumTrace, TimeTrace};

use crate::config::Config;
use crate::io::{read_input, stem, Ctx};
use crate::plot::{emit, Figure, Series};
use crate::report::{Derived, Failure, Report, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    /// S11 reflection: freq_hz + (re, im | mag | mag_db)
    Cavity,
    /// Energy or I/Q decay: time_s + (energy | i, q)
    Ringdown,
    /// Lorentzian: frequency_hz + psd column
    Spectrum,
    /// power_w | power_dbm, gamma_hz [, gamma_err_hz]
    GammaVsPower,
    /// temperature_k, gamma_hz
    Tls,
    /// I/Q trace: time_s, i, q
    Drift,
    /// temperature_k, area [, correction]
    Thermal,
    /// temperature_k, ratio
    G0,
}

impl FitKind {
    pub fn name(self) -> &'static str {
        match self {
            FitKind::Cavity => "cavity",
            FitKind::Ringdown => "ringdown",
            FitKind::Spectrum => "spectrum",
            FitKind::GammaVsPower => "gamma-vs-power",
            FitKind::Tls => "tls",
            FitKind::Drift => "drift",
            FitKind::Thermal => "thermal",
            FitKind::G0 => "g0",
        }
    }
}

struct PlotData {
    title: String,
    x_label: &'static str,
    y_label: &'static str,
    log_x: bool,
    log_y: bool,
    series: Vec<(&'static str, Vec<f64>, Vec<f64>)>,
}

pub struct Outcome {
    pub path: PathBuf,
    pub result: Result<PathBuf, Failure>,
    pub status: Status,
}

/// Fits every input in parallel; results come back in sorted path order.
pub fn run(ctx: &Ctx, kind: FitKind, inputs: &[PathBuf]) -> Vec<Outcome> {
    let mut sorted = inputs.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted
        .par_iter()
        .map(|p| {
            let (result, status) = match fit_file(ctx, kind, p) {
                Ok((path, status)) => (Ok(path), status),
                Err(e) => (Err(e), Status::FitFailed),
            };
            Outcome {
                path: p.clone(),
                result,
                status,
            }
        })
        .collect()
}

fn fit_file(ctx: &Ctx, kind: FitKind, path: &Path) -> Result<(PathBuf, Status), Failure> {
    let (text, digest) = read_input(path)?;
    let mut report = ctx.report(&format!("fit {}", kind.name()), vec![digest]);
    let stem = format!("{}.{}", stem(path), kind.name());
    let plot = match fit_text(&ctx.cfg, kind, &text, &mut report) {
        Ok(p) => p,
        Err(Failure::Numerical(m)) => {
            report.status = Status::FitFailed;
            report.diagnostics.push(m);
            None
        }
        Err(Failure::Input(e)) => return Err(Failure::Input(anyhow!("{}: {e:#}", path.display()))),
    };
    let out = ctx.write_report(&stem, &report)?;
    if let Some(p) = plot {
        let fig = Figure {
            title: &p.title,
            x_label: p.x_label,
            y_label: p.y_label,
            log_x: p.log_x,
            log_y: p.log_y,
            series: p
                .series
                .iter()
                .map(|(l, x, y)| Series { label: l, x, y })
                .collect(),
        };
        emit(&fig, ctx.plot, &ctx.out, &stem)?;
    }
    Ok((out, report.status))
}

fn table(text: &str) -> Result<Table, Failure> {
    Table::parse(text).map_err(|e| Failure::Input(e.into()))
}

fn column<'a>(t: &'a Table, name: &str) -> Result<&'a [f64], Failure> {
    t.column(name).map_err(|e| Failure::Input(e.into()))
}

fn require_mechanics(cfg: &Config) -> Result<f64, Failure> {
    Ok(hz_to_angular(Config::require(&cfg.mechanics, "mechanics")?.frequency_hz))
}

fn fit_text(cfg: &Config, kind: FitKind, text: &str, report: &mut Report) -> Result<Option<PlotData>, Failure> {
    match kind {
        FitKind::Cavity => cavity(cfg, text, report),
        FitKind::Ringdown => ringdown(cfg, text, report),
        FitKind::Spectrum => spectrum(cfg, text, report),
        FitKind::GammaVsPower => gamma_vs_power(text, report),
        FitKind::Tls => tls(cfg, text, report),
        FitKind::Drift => drift(cfg, text, report),
        FitKind::Thermal => thermal(cfg, text, report),
        FitKind::G0 => g0(cfg, text, report),
    }
}

fn cavity(cfg: &Config, text: &str, report: &mut Report) -> Result<Option<PlotData>, Failure> {
    let trace = ReflectionTrace::from_csv(text).map_err(|e| Failure::Input(e.into()))?;
    let fit = fit_s11(&trace, cfg.fit.hint()?)?;
    report.push_fit("s11", &fit);
    let kappa_0 = (fit.value("kappa") - fit.value("kappa_ex")) / TAU;
    report.derived.push(Derived::new(
        "kappa_0",
        kappa_0,
        "Hz",
        "kappa - kappa_ex",
        &["s11.kappa", "s11.kappa_ex"],
    ));
    let cav = CavityParams::new(fit.value("omega_c"), fit.value("kappa"), fit.value("kappa_ex"));
    let measured: Vec<f64> = match &trace.data {
        ReflectionData::Complex(v) => v.iter().map(|z| z.norm()).collect(),
        ReflectionData::Magnitude(v) => v.clone(),
    };
    let gain = fit
        .get("gain_abs")
        .map(|p| p.value)
        .unwrap_or_else(|| fit.value("gain_re").hypot(fit.value("gain_im")));
    let model = match cav {
        Ok(c) => trace.frequencies.iter().map(|&f| gain * s11_model(f, &c).norm()).collect(),
        Err(_) => Vec::new(),
    };
    Ok(Some(PlotData {
        title: "reflection".into(),
        x_label: "frequency (Hz)",
        y_label: "|S11|",
        log_x: false,
        log_y: false,
        series: vec![
            ("data", trace.frequencies.clone(), measured),
            ("fit", trace.frequencies.clone(), model),
        ],
    }))
}

fn ringdown(cfg: &Config, text: &str, report: &mut Report) -> Result<Option<PlotData>, Failure> {
    let trace = TimeTrace::from_csv(text).map_err(|e| Failure::Input(e.into()))?;
    let energy = match (trace.as_real(), trace.metadata.label.as_deref()) {
        (Some(_), Some("energy")) => trace.clone(),
        _ => trace.energy(),
    };
    // a full protocol trace rings down from its energy maximum
    let peak = energy
        .as_real()
        .unwrap_or_default()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(k, _)| k);
    if peak > 0 {
        report
            .warnings
            .push(format!("decay fitted from the energy maximum at t = {} s", energy.t0 + peak as f64 * energy.dt()));
    }
    let energy = energy.slice(peak..energy.len());
    let fit = fit_exponential_decay(&energy)?;
    report.push_fit("decay", &fit);
    let gamma = fit.value("gamma");
    report.derived.push(
        Derived::new("decay_time", 1.0 / gamma, "s", "1 / gamma", &["decay.gamma"])
            .with_error(fit.std_error("gamma") / (gamma * gamma)),
    );
    if let Some(m) = &cfg.mechanics {
        let q = hz_to_angular(m.frequency_hz) / gamma;
        report.derived.push(
            Derived::new(
                "quality_factor",
                q,
                "1",
                "Omega_m / gamma",
                &["mechanics.frequency_hz", "decay.gamma"],
            )
            .with_error(q * fit.std_error("gamma") / gamma),
        );
    }
    let t: Vec<f64> = energy.times().iter().map(|x| x - energy.t0).collect();
    let e = energy.as_real().unwrap_or_default().to_vec();
    let model = t.iter().map(|x| fit.value("amplitude") * (-gamma * x).exp()).collect();
    Ok(Some(PlotData {
        title: "ringdown".into(),
        x_label: "time from first sample (s)",
        y_label: "energy",
        log_x: false,
        log_y: true,
        series: vec![("data", t.clone(), e), ("fit", t, model)],
    }))
}

fn spectrum(cfg: &Config, text: &str, report: &mut Report) -> Result<Option<PlotData>, Failure> {
    let mut trace = SpectrumTrace::from_csv(text).map_err(|e| Failure::Input(e.into()))?;
    if let Some(half) = cfg.fit.spectrum_half_span_hz {
        let (k, _) = trace
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Failure::Input(anyhow!("empty spectrum")))?;
        let c = trace.frequencies()[k];
        trace = trace.window(c - half, c + half)?;
    }
    let fit = fit_lorentzian(&trace)?;
    report.push_fit("lorentzian", &fit);
    report.derived.push(
        Derived::new("gamma_eff", fit.value("fwhm"), "Hz", "fwhm (energy decay rate / 2 pi)", &["lorentzian.fwhm"])
            .with_error(fit.std_error("fwhm")),
    );
    let (c, w, a, o) = (fit.value("center"), fit.value("fwhm"), fit.value("area"), fit.value("offset"));
    let f = trace.frequencies().to_vec();
    let model = f
        .iter()
        .map(|x| o + a * w / (TAU * ((x - c).powi(2) + 0.25 * w * w)))
        .collect();
    Ok(Some(PlotData {
        title: "spectrum".into(),
        x_label: "frequency (Hz)",
        y_label: "PSD",
        log_x: false,
        log_y: false,
        series: vec![("data", f.clone(), trace.values().to_vec()), ("fit", f, model)],
    }))
}

fn power_column(t: &Table) -> Result<Vec<f64>, Failure> {
    if t.has("power_w") {
        Ok(column(t, "power_w")?.to_vec())
    } else if t.has("power_dbm") {
        column(t, "power_dbm")?
            .iter()
            .map(|&d| dbm_to_watts(d).map_err(Failure::from))
            .collect()
    } else {
        Err(Failure::Input(anyhow!("missing column `power_w` or `power_dbm`")))
    }
}

fn gamma_vs_power(text: &str, report: &mut Report) -> Result<Option<PlotData>, Failure> {
    let t = table(text)?;
    let p = power_column(&t)?;
    let g: Vec<f64> = column(&t, "gamma_hz")?.iter().map(|&v| hz_to_angular(v)).collect();
    let sig: Option<Vec<f64>> = if t.has("gamma_err_hz") {
        Some(column(&t, "gamma_err_hz")?.iter().map(|&v| hz_to_angular(v)).collect())
    } else {
        None
    };
    let fit = fit_gamma_vs_power(&p, &g, sig.as_deref())?;
    report.push_fit("gamma_vs_power", &fit);
    let p0 = fit.value("p0");
    if p0 > 0.0 {
        report.derived.push(
            Derived::new("p0_dbm", watts_to_dbm(p0)?, "dBm", "10 log10(p0 / 1 mW)", &["gamma_vs_power.p0"])
                .with_error(10.0 / std::f64::consts::LN_10 * fit.std_error("p0") / p0),
        );
    }
    let gm = fit.value("gamma_m") / TAU;
    let model = p.iter().map(|x| gm * (1.0 + x / p0)).collect();
    let ghz = g.iter().map(|v| v / TAU).collect();
    Ok(Some(PlotData {
        title: "damping vs pump power".into(),
        x_label: "power (W)",
        y_label: "gamma_eff (Hz)",
        log_x: true,
        log_y: true,
        series: vec![("data", p.clone(), ghz), ("fit", p, model)],
    }))
}

fn tls(cfg: &Config, text: &str, report: &mut Report) -> Result<Option<PlotData>, Failure> {
    let t = table(text)?;
    let temps = column(&t, "temperature_k")?.to_vec();
    let g: Vec<f64> = column(&t, "gamma_hz")?.iter().map(|&v| hz_to_angular(v)).collect();
    let t_ref = match cfg.fit.tls_reference_k {
        Some(v) => v,
        // geometric mean keeps the two parameters least correlated
        None => (temps.iter().map(|v| v.ln()).sum::<f64>() / temps.len().max(1) as f64).exp(),
    };
    let fit = fit_tls_power_law(&temps, &g, t_ref)?;
    report.push_fit("tls", &fit);
    report
        .derived
        .push(Derived::new("reference_temperature", t_ref, "K", "fit.tls_reference_k or geometric mean", &[]));
    let gr = fit.value("gamma_ref") / TAU;
    let alpha = fit.value("alpha");
    let model = temps.iter().map(|x| gr * (x / t_ref).powf(alpha)).collect();
    let ghz = g.iter().map(|v| v / TAU).collect();
    Ok(Some(PlotData {
        title: "damping vs temperature".into(),
        x_label: "temperature (K)",
        y_label: "gamma (Hz)",
        log_x: true,
        log_y: true,
        series: vec![("data", temps.clone(), ghz), ("fit", temps, model)],
    }))
}

fn drift(cfg: &Config, text: &str, report: &mut Report) -> Result<Option<PlotData>, Failure> {
    let trace = TimeTrace::from_csv(text).map_err(|e| Failure::Input(e.into()))?;
    let window = cfg.fit.drift_smoothing_s.unwrap_or(1.0);
    let f = instantaneous_frequency(&trace, window)?;
    report.warnings.extend(f.metadata.warnings.iter().cloned());
    let t = f.times();
    let y = f.as_real().unwrap_or_default().to_vec();
    let mut fit = fit_affine(&t, &y, None)?;
    for p in &mut fit.parameters {
        match p.name.as_str() {
            "slope" => {
                p.name = "drift_rate".into();
                p.unit = Unit::HertzPerSecond;
            }
            _ => {
                p.name = "frequency_at_t0".into();
                p.unit = Unit::Hertz;
            }
        }
    }
    report.push_fit("drift", &fit);
    let model = t
        .iter()
        .map(|x| fit.value("frequency_at_t0") + fit.value("drift_rate") * x)
        .collect();
    Ok(Some(PlotData {
        title: "instantaneous frequency".into(),
        x_label: "time (s)",
        y_label: "frequency offset (Hz)",
        log_x: false,
        log_y: false,
        series: vec![("data", t.clone(), y), ("fit", t, model)],
    }))
}

fn thermal(cfg: &Config, text: &str, report: &mut Report) -> Result<Option<PlotData>, Failure> {
    let omega_m = require_mechanics(cfg)?;
    let t = table(text)?;
    let temps = column(&t, "temperature_k")?;
    let area = column(&t, "area")?;
    let corr = if t.has("correction") {
        column(&t, "correction")?.to_vec()
    } else {
        vec![1.0; temps.len()]
    };
    let points: Vec<ThermalPoint> = temps
        .iter()
        .zip(area)
        .zip(&corr)
        .map(|((&temperature, &area), &correction)| ThermalPoint {
            temperature,
            area,
            correction,
        })
        .collect();
    let opts = ThermalOptions {
        threshold: cfg.fit.thermal_threshold_k.unwrap_or(DEFAULT_THERMALIZATION_THRESHOLD),
        include_below: cfg.fit.include_below_threshold,
    };
    let cal = thermal_calibration(&points, omega_m, &opts)?;
    report.push_fit("area_vs_occupation", &cal.fit);
    let c = &cal.constant;
    let src = ["area_vs_occupation.slope"];
    report.derived.push(
        Derived::new("quanta_per_area", c.quanta_per_area, "quanta/area", "1 / slope", &src)
            .with_error(c.quanta_per_area_std),
    );
    report
        .derived
        .push(Derived::new("valid_above", c.valid_above, "K", "lowest fitted temperature", &[]));
    report.derived.push(
        Derived::new(
            "base_occupation",
            cal.base_occupation,
            "quanta",
            "(area(T_base) - intercept) / slope",
            &["area_vs_occupation.slope", "area_vs_occupation.intercept"],
        ),
    );
    report.derived.push(
        Derived::new(
            "bath_temperature",
            c.bath_extrapolation,
            "K",
            "inverse Bose occupation of base_occupation",
            &["base_occupation", "mechanics.frequency_hz"],
        )
        .with_error(c.bath_extrapolation_std),
    );
    if !cal.excluded.is_empty() {
        report.warnings.push(format!(
            "excluded below {} K: {:?}",
            opts.threshold, cal.excluded
        ));
    }
    let n: Vec<f64> = temps
        .iter()
        .map(|&x| emech::system::thermal_occupation(x, omega_m))
        .collect::<emech::Result<_>>()?;
    let ac: Vec<f64> = area.iter().zip(&corr).map(|(a, c)| a * c).collect();
    let (s, b) = (cal.fit.value("slope"), cal.fit.value("intercept"));
    let model = n.iter().map(|x| s * x + b).collect();
    Ok(Some(PlotData {
        title: "sideband area vs occupation".into(),
        x_label: "thermal occupation",
        y_label: "corrected area",
        log_x: false,
        log_y: false,
        series: vec![("data", n.clone(), ac), ("fit", n, model)],
    }))
}

fn g0(cfg: &Config, text: &str, report: &mut Report) -> Result<Option<PlotData>, Failure> {
    let omega_m = require_mechanics(cfg)?;
    let depth = cfg
        .fit
        .pm_depth_rad
        .ok_or_else(|| Failure::Input(anyhow!("[fit] pm_depth_rad is required for g0")))?;
    let f_mod = cfg
        .fit
        .modulation_frequency_hz
        .ok_or_else(|| Failure::Input(anyhow!("[fit] modulation_frequency_hz is required for g0")))?;
    let t = table(text)?;
    let temps = column(&t, "temperature_k")?;
    let ratio = column(&t, "ratio")?;
    let threshold = cfg.fit.thermal_threshold_k.unwrap_or(DEFAULT_THERMALIZATION_THRESHOLD);
    let fit = gorodetsky_g0(temps, ratio, depth, hz_to_angular(f_mod), omega_m, threshold)?;
    report.push_fit("g0", &fit);
    let n: Vec<f64> = temps
        .iter()
        .map(|&x| emech::system::thermal_occupation(x, omega_m))
        .collect::<emech::Result<_>>()?;
    let (s, b) = (fit.value("slope"), fit.value("intercept"));
    let model = n.iter().map(|x| s * x + b).collect();
    Ok(Some(PlotData {
        title: "area ratio vs occupation".into(),
        x_label: "thermal occupation",
        y_label: "area ratio",
        log_x: false,
        log_y: false,
        series: vec![("data", n.clone(), ratio.to_vec()), ("fit", n, model)],
    }))
}

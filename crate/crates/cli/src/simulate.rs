use std::f64::consts::TAU;
use std::path::PathBuf;

use anyhow::{anyhow, Context as _};
use clap::ValueEnum;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use emech::spectrum::{rwa_rates_from_full, spectrum_full, spectrum_rwa, FullParams, SpectrumNoise};
use emech::system::{hz_to_angular, thermal_occupation};
use emech::timedomain::{
    simulate_ringdown, simulate_thermal_trajectory, welch_psd, RingdownProtocol, TrajectoryRates,
    Window,
};
use emech::trace::{SpectrumTrace, TimeTrace};

use crate::config::{Config, SpectrumModel};
use crate::io::{Ctx, DataFormat};
use crate::plot::{emit, Figure, Series};
use crate::report::{Derived, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Spectrum,
    Ringdown,
    Trajectory,
}

pub fn run(ctx: &Ctx, kind: SimKind) -> Result<Vec<PathBuf>, Failure> {
    match kind {
        SimKind::Spectrum => spectrum(ctx),
        SimKind::Ringdown => ringdown(ctx),
        SimKind::Trajectory => trajectory(ctx),
    }
}

fn write_spectrum(ctx: &Ctx, stem: &str, s: &SpectrumTrace) -> anyhow::Result<PathBuf> {
    match ctx.format {
        DataFormat::Csv => ctx.write(&format!("{stem}.csv"), &s.to_csv()),
        DataFormat::Json => ctx.write(&format!("{stem}.json"), &(serde_json::to_string_pretty(s)? + "\n")),
    }
}

fn write_trace(ctx: &Ctx, stem: &str, t: &TimeTrace) -> anyhow::Result<PathBuf> {
    match ctx.format {
        DataFormat::Csv => ctx.write(&format!("{stem}.csv"), &t.to_csv()),
        DataFormat::Json => ctx.write(&format!("{stem}.json"), &(serde_json::to_string_pretty(t)? + "\n")),
    }
}

/// Parameters of the full model from the config; Δ defaults to −Ω_m.
pub fn full_params(cfg: &Config) -> anyhow::Result<FullParams> {
    let cav = Config::require(&cfg.cavity, "cavity")?;
    let mech = Config::require(&cfg.mechanics, "mechanics")?;
    let coupling = Config::require(&cfg.coupling, "coupling")?;
    let gamma_hz = mech
        .gamma_hz
        .ok_or_else(|| anyhow!("[mechanics] gamma_hz is required"))?;
    let g_hz = coupling
        .g_hz
        .ok_or_else(|| anyhow!("[coupling] g_hz is required"))?;
    let omega_m = hz_to_angular(mech.frequency_hz);
    Ok(FullParams {
        kappa: hz_to_angular(cav.kappa_hz),
        kappa_ex: hz_to_angular(cav.kappa_ex_hz),
        delta: coupling.detuning_hz.map_or(-omega_m, hz_to_angular),
        omega_m,
        g: hz_to_angular(g_hz),
        gamma_m: hz_to_angular(gamma_hz),
    })
}

pub fn bath_occupation(cfg: &Config) -> anyhow::Result<f64> {
    let env = Config::require(&cfg.environment, "environment")?;
    let mech = Config::require(&cfg.mechanics, "mechanics")?;
    Ok(thermal_occupation(env.temperature_k, hz_to_angular(mech.frequency_hz))?)
}

fn spectrum(ctx: &Ctx) -> Result<Vec<PathBuf>, Failure> {
    let cfg = &ctx.cfg;
    let sim = cfg.simulate.spectrum.clone().unwrap_or(crate::config::SpectrumSim {
        model: SpectrumModel::Rwa,
        half_span_linewidths: 20.0,
        points: 801,
    });
    if sim.points < 2 {
        return Err(Failure::Input(anyhow!("[simulate.spectrum] points must be at least 2")));
    }
    let p = full_params(cfg)?;
    let noise = SpectrumNoise {
        n_th: bath_occupation(cfg)?,
        n_tilde: cfg.noise.n_tilde_quanta,
        n_add: cfg.noise.n_add_quanta,
    };
    let rates = rwa_rates_from_full(&p)?;
    let center = rates.omega_eff / TAU;
    let half = sim.half_span_linewidths * (rates.gamma_m + rates.gamma_e) / TAU;
    let freqs: Vec<f64> = (0..sim.points)
        .map(|k| center - half + 2.0 * half * k as f64 / (sim.points - 1) as f64)
        .collect();
    let trace = match sim.model {
        SpectrumModel::Rwa => spectrum_rwa(&freqs, &rates, &noise)?,
        SpectrumModel::Full => spectrum_full(&freqs, &p, &noise)?,
    };
    let mut report = ctx.report("simulate spectrum", Vec::new());
    report.warnings.extend(trace.metadata.warnings.iter().cloned());
    report.derived.push(Derived::new(
        "gamma_eff",
        (rates.gamma_m + rates.gamma_e) / TAU,
        "Hz",
        "Gamma_m + Gamma_e",
        &["mechanics.gamma_hz", "coupling.g_hz", "cavity.kappa_hz"],
    ));
    report.derived.push(Derived::new(
        "omega_eff",
        center,
        "Hz",
        "Omega_m + Omega_e",
        &["mechanics.frequency_hz", "coupling.g_hz", "cavity.kappa_hz"],
    ));
    let mut out = vec![write_spectrum(ctx, "spectrum", &trace)?];
    out.push(ctx.write_report("spectrum.report", &report)?);
    let fig = Figure {
        title: "output spectrum",
        x_label: "frequency from pump (Hz)",
        y_label: "PSD (quanta)",
        log_x: false,
        log_y: false,
        series: vec![Series {
            label: if sim.model == SpectrumModel::Rwa { "rwa" } else { "full" },
            x: trace.frequencies(),
            y: trace.values(),
        }],
    };
    emit(&fig, ctx.plot, &ctx.out, "spectrum")?;
    Ok(out)
}

fn ringdown(ctx: &Ctx) -> Result<Vec<PathBuf>, Failure> {
    let sim = ctx
        .cfg
        .simulate
        .ringdown
        .as_ref()
        .context("config section [simulate.ringdown] is required")?;
    let protocol = RingdownProtocol {
        excite_duration: sim.excite_duration_s,
        amplify_duration: sim.amplify_duration_s,
        decay_duration: sim.decay_duration_s,
        excite_rate: sim.excite_rate_per_s,
        gamma_blue: hz_to_angular(sim.gamma_blue_hz),
        gamma_red: hz_to_angular(sim.gamma_red_hz),
        initial_amplitude: sim.initial_amplitude,
    };
    let mut trace = simulate_ringdown(&protocol, sim.sample_rate_hz)?;
    if sim.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let noisy: Vec<Complex64> = trace
            .as_complex()
            .into_iter()
            .map(|z| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                z + Complex64::new(re, im) * sim.noise_std
            })
            .collect();
        trace = TimeTrace::complex(trace.sample_rate, trace.t0, noisy)?;
    }
    let mut report = ctx.report("simulate ringdown", Vec::new());
    report.seed = Some(ctx.seed);
    report.derived.push(Derived::new(
        "decay_start",
        protocol.decay_start(),
        "s",
        "excite_duration + amplify_duration",
        &["simulate.ringdown.excite_duration_s", "simulate.ringdown.amplify_duration_s"],
    ));
    let out = vec![
        write_trace(ctx, "ringdown", &trace)?,
        ctx.write_report("ringdown.report", &report)?,
    ];
    let t = trace.times();
    let e: Vec<f64> = trace.as_complex().iter().map(|z| z.norm_sqr()).collect();
    let fig = Figure {
        title: "ringdown",
        x_label: "time (s)",
        y_label: "energy",
        log_x: false,
        log_y: true,
        series: vec![Series {
            label: "|a|^2",
            x: &t,
            y: &e,
        }],
    };
    emit(&fig, ctx.plot, &ctx.out, "ringdown")?;
    Ok(out)
}

fn trajectory(ctx: &Ctx) -> Result<Vec<PathBuf>, Failure> {
    let sim = ctx
        .cfg
        .simulate
        .trajectory
        .as_ref()
        .context("config section [simulate.trajectory] is required")?;
    let rates = TrajectoryRates {
        gamma_eff: hz_to_angular(sim.gamma_eff_hz),
        omega_offset: hz_to_angular(sim.offset_hz),
    };
    let trace = simulate_thermal_trajectory(
        &rates,
        sim.occupation_quanta,
        sim.sample_rate_hz,
        sim.duration_s,
        ctx.seed,
    )?;
    let segment = (sim.segment_s * sim.sample_rate_hz).round() as usize;
    let psd = welch_psd(&trace, segment, 0.5, Window::Hann)?;
    let mut report = ctx.report("simulate trajectory", Vec::new());
    report.seed = Some(ctx.seed);
    report.warnings.extend(trace.metadata.warnings.iter().cloned());
    if let Some(n) = psd.metadata.averages {
        report.derived.push(Derived::new(
            "welch_averages",
            n as f64,
            "1",
            "segments at 50% overlap",
            &["simulate.trajectory.duration_s", "simulate.trajectory.segment_s"],
        ));
    }
    let out = vec![
        write_trace(ctx, "trajectory", &trace)?,
        write_spectrum(ctx, "trajectory_psd", &psd)?,
        ctx.write_report("trajectory.report", &report)?,
    ];
    let fig = Figure {
        title: "thermal trajectory PSD",
        x_label: "frequency (Hz)",
        y_label: "PSD (1/Hz)",
        log_x: false,
        log_y: true,
        series: vec![Series {
            label: "welch",
            x: psd.frequencies(),
            y: psd.values(),
        }],
    };
    emit(&fig, ctx.plot, &ctx.out, "trajectory_psd")?;
    Ok(out)
}

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};

use emech::backaction::PumpModel;
use emech::cooling::cooling_curve;
use emech::system::{dbm_to_watts, watts_to_dbm};
use emech::table::Table;

use crate::config::Config;
use crate::io::{read_input, Ctx};
use crate::plot::{emit, Figure, Series};
use crate::report::{Derived, Failure, InputDigest, Report};
use crate::simulate::bath_occupation;

/// Calibration constant (phonons per unit area) and its 1σ, from the config
/// or from a `fit thermal` report.
fn calibration(cfg: &Config, inputs: &mut Vec<InputDigest>) -> anyhow::Result<(f64, f64, String)> {
    let missing = || {
        anyhow!(
            "missing calibration constant: set [calibration] quanta_per_area, or \
             [calibration] thermal_report = \"<file>.json\" from `emech fit thermal`"
        )
    };
    let c = cfg.calibration.as_ref().ok_or_else(missing)?;
    if let Some(q) = c.quanta_per_area {
        return Ok((q, c.quanta_per_area_std, "calibration.quanta_per_area".into()));
    }
    let path = c.thermal_report.as_ref().ok_or_else(missing)?;
    let full = cfg.resolve(path);
    let bytes = std::fs::read(&full).with_context(|| format!("reading {}", full.display()))?;
    inputs.push(InputDigest::of(&full, &bytes));
    let r: Report = serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is not an emech report", full.display()))?;
    let d = r
        .derived
        .iter()
        .find(|d| d.name == "quanta_per_area")
        .ok_or_else(|| anyhow!("{} has no quanta_per_area; was it made by `fit thermal`?", full.display()))?;
    Ok((d.value, d.std_error.unwrap_or(0.0), format!("{}:quanta_per_area", full.display())))
}

struct Measured {
    power_dbm: Vec<f64>,
    n_bar: Vec<f64>,
    n_bar_std: Vec<f64>,
}

fn measured(text: &str, q: f64, q_std: f64) -> anyhow::Result<Measured> {
    let t = Table::parse(text)?;
    let power_dbm: Vec<f64> = if t.has("power_dbm") {
        t.column("power_dbm")?.to_vec()
    } else if t.has("power_w") {
        t.column("power_w")?
            .iter()
            .map(|&w| watts_to_dbm(w))
            .collect::<emech::Result<_>>()?
    } else {
        bail!("missing column `power_dbm` or `power_w`");
    };
    let area = t.column("area")?;
    let area_err = if t.has("area_err") {
        t.column("area_err")?.to_vec()
    } else {
        vec![0.0; area.len()]
    };
    if area.is_empty() {
        bail!("sweep has no rows");
    }
    let n_bar = area.iter().map(|a| q * a).collect();
    let n_bar_std = area
        .iter()
        .zip(&area_err)
        .map(|(a, e)| ((q * e).powi(2) + (a * q_std).powi(2)).sqrt())
        .collect();
    Ok(Measured {
        power_dbm,
        n_bar,
        n_bar_std,
    })
}

pub fn run(ctx: &Ctx, sweep: Option<&Path>) -> Result<Vec<PathBuf>, Failure> {
    let cfg = &ctx.cfg;
    let mut inputs = Vec::new();
    let mut written = Vec::new();
    let mut derived = Vec::new();
    let mut warnings = Vec::new();
    let mut plot_series: Vec<(&str, Vec<f64>, Vec<f64>)> = Vec::new();

    if let Some(path) = sweep {
        let (text, digest) = read_input(path)?;
        inputs.push(digest);
        let (q, q_std, q_src) = calibration(cfg, &mut inputs)?;
        let m = measured(&text, q, q_std).map_err(|e| Failure::Input(anyhow!("{}: {e:#}", path.display())))?;
        let k = m
            .n_bar
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .expect("non-empty sweep");
        let src = path.display().to_string();
        derived.push(
            Derived::new("n_bar_min", m.n_bar[k], "quanta", "min over sweep of quanta_per_area * area", &[&q_src, &src])
                .with_error(m.n_bar_std[k]),
        );
        derived.push(Derived::new("optimal_power", m.power_dbm[k], "dBm", "argmin of n_bar", &[&src]));
        if k == 0 || k + 1 == m.n_bar.len() {
            warnings.push("minimum occupation sits at the edge of the sweep".into());
        }
        written.push(ctx.write_table(
            "cooling_measured",
            &["power_dbm", "n_bar", "n_bar_std"],
            &[&m.power_dbm, &m.n_bar, &m.n_bar_std],
        )?);
        plot_series.push(("measured", m.power_dbm, m.n_bar));
    }

    if let Some(c) = &cfg.cooling {
        let pump = Config::require(&cfg.pump, "pump")?;
        let p0 = pump.p0_watts()?;
        let model = PumpModel::new(emech::system::hz_to_angular(pump.gamma_m_hz), p0)?;
        let n_th = match c.n_th_quanta {
            Some(n) => n,
            None => bath_occupation(cfg).context("[cooling] n_th_quanta not set")?,
        };
        let powers: Vec<f64> = (0..c.points)
            .map(|k| c.p_min_dbm + (c.p_max_dbm - c.p_min_dbm) * k as f64 / (c.points - 1) as f64)
            .map(dbm_to_watts)
            .collect::<emech::Result<_>>()?;
        let curve = cooling_curve(&powers, &model, n_th, c.n_tilde_at_p0_quanta / p0)?;
        let best = curve.minimum();
        let cfg_src = ["pump.gamma_m_hz", "pump.p0", "cooling.n_tilde_at_p0_quanta", "cooling.n_th_quanta"];
        derived.push(Derived::new("model_n_bar_min", best.n_bar, "quanta", "cooling_curve minimum", &cfg_src));
        derived.push(Derived::new(
            "model_optimal_power",
            watts_to_dbm(best.power)?,
            "dBm",
            "cooling_curve argmin",
            &cfg_src,
        ));
        let dbm: Vec<f64> = curve
            .points
            .iter()
            .map(|p| watts_to_dbm(p.power))
            .collect::<emech::Result<_>>()?;
        let ge: Vec<f64> = curve.points.iter().map(|p| p.gamma_e / std::f64::consts::TAU).collect();
        let nt: Vec<f64> = curve.points.iter().map(|p| p.n_tilde).collect();
        let nb: Vec<f64> = curve.points.iter().map(|p| p.n_bar).collect();
        written.push(ctx.write_table(
            "cooling_model",
            &["power_dbm", "gamma_e_hz", "n_tilde", "n_bar"],
            &[&dbm, &ge, &nt, &nb],
        )?);
        plot_series.push(("model", dbm, nb));
    }

    if sweep.is_none() && cfg.cooling.is_none() {
        return Err(Failure::Input(anyhow!(
            "nothing to do: pass a measured sweep CSV (power_dbm, area) or add a [cooling] section"
        )));
    }

    let mut report = ctx.report("cooling-curve", inputs);
    report.derived = derived;
    report.warnings = warnings;
    written.insert(0, ctx.write_report("cooling_curve", &report)?);
    let fig = Figure {
        title: "cooling curve",
        x_label: "pump power (dBm)",
        y_label: "phonon occupation",
        log_x: false,
        log_y: true,
        series: plot_series
            .iter()
            .map(|(l, x, y)| Series { label: l, x, y })
            .collect(),
    };
    emit(&fig, ctx.plot, &ctx.out, "cooling_curve")?;
    Ok(written)
}

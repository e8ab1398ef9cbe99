//! `emech report`: gathers parameters from configs and earlier reports and
//! derives the headline figures of merit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;

use emech::backaction::{cooperativities, resolved_sideband_damping};
use emech::cooling::{force_noise_density, optimal_cooling};
use emech::system::{coherence_time, hz_to_angular, quality_factor, Environment, MechanicalMode};

use crate::io::{read_input, Ctx};
use crate::report::{Derived, Failure, InputDigest, Parameter, Report};

fn unit_of(key: &str) -> &'static str {
    const SUFFIX: [(&str, &str); 9] = [
        ("_hz", "Hz"),
        ("_dbm", "dBm"),
        ("_kg", "kg"),
        ("_k", "K"),
        ("_s", "s"),
        ("_w", "W"),
        ("_quanta", "quanta"),
        ("_rad", "rad"),
        ("_m2", "m^2"),
    ];
    SUFFIX
        .iter()
        .find(|(s, _)| key.ends_with(s))
        .map_or("", |(_, u)| u)
}

#[derive(Default)]
struct Registry {
    params: BTreeMap<String, Parameter>,
    warnings: Vec<String>,
}

impl Registry {
    fn add(&mut self, p: Parameter) {
        match self.params.get(&p.name) {
            Some(old) => {
                let scale = old.value.abs().max(p.value.abs());
                if (old.value - p.value).abs() > 1e-9 * scale {
                    self.warnings.push(format!(
                        "conflicting values for {}: {} {} from {} and {} {} from {}; keeping the first",
                        p.name, old.value, old.unit, old.source, p.value, p.unit, p.source
                    ));
                }
            }
            None => {
                self.params.insert(p.name.clone(), p);
            }
        }
    }

    fn get(&self, name: &str) -> Option<f64> {
        self.params.get(name).map(|p| p.value)
    }

    fn add_toml(&mut self, prefix: &str, table: &toml::Table, source: &str) {
        for (k, v) in table {
            let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            let value = match v {
                toml::Value::Float(f) => *f,
                toml::Value::Integer(i) => *i as f64,
                toml::Value::Table(t) => {
                    self.add_toml(&name, t, source);
                    continue;
                }
                _ => continue,
            };
            self.add(Parameter {
                unit: unit_of(k).into(),
                name,
                value,
                std_error: None,
                source: source.into(),
            });
        }
    }

    fn add_report(&mut self, r: &Report, source: &str) {
        for f in &r.fits {
            for p in &f.report.parameters {
                self.add(Parameter {
                    name: format!("{}.{}", f.name, p.name),
                    value: p.value,
                    std_error: Some(p.std_error),
                    unit: serde_json::to_value(&p.unit)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_owned))
                        .unwrap_or_default(),
                    source: source.into(),
                });
            }
        }
        for d in &r.derived {
            self.add(Parameter {
                name: d.name.clone(),
                value: d.value,
                std_error: d.std_error,
                unit: d.unit.clone(),
                source: source.into(),
            });
        }
    }
}

fn load(reg: &mut Registry, path: &Path, text: &str) -> Result<(), Failure> {
    let source = path.display().to_string();
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "toml" => {
            let t: toml::Table = toml::from_str(text).map_err(|e| Failure::Input(anyhow!("{source}: {e}")))?;
            reg.add_toml("", &t, &source);
        }
        "json" => {
            let r: Report = serde_json::from_str(text)
                .map_err(|e| Failure::Input(anyhow!("{source}: not an emech report: {e}")))?;
            reg.add_report(&r, &source);
        }
        _ => {
            return Err(Failure::Input(anyhow!(
                "{source}: expected a .toml config or a .json report"
            )))
        }
    }
    Ok(())
}

/// Figures of merit computable from whatever the registry holds.
fn derive(reg: &Registry) -> Result<Vec<Derived>, Failure> {
    let mut out = Vec::new();
    let cav = (reg.get("cavity.kappa_hz"), reg.get("cavity.kappa_ex_hz"));
    if let (Some(k), Some(ke)) = cav {
        out.push(Derived::new("eta", ke / k, "1", "kappa_ex / kappa", &["cavity.kappa_ex_hz", "cavity.kappa_hz"]));
        out.push(Derived::new("kappa_0", k - ke, "Hz", "kappa - kappa_ex", &["cavity.kappa_hz", "cavity.kappa_ex_hz"]));
    }
    let (Some(f_m), Some(g_m)) = (reg.get("mechanics.frequency_hz"), reg.get("mechanics.gamma_hz")) else {
        return Ok(out);
    };
    let mode = MechanicalMode::from_hz(f_m, g_m, reg.get("mechanics.mass_kg"))?;
    let mech = ["mechanics.frequency_hz", "mechanics.gamma_hz"];
    out.push(Derived::new("quality_factor", quality_factor(&mode), "1", "Omega_m / Gamma_m", &mech));

    let Some(temp) = reg.get("environment.temperature_k") else {
        return Ok(out);
    };
    let env = Environment::new(temp)?;
    let with_t = ["mechanics.frequency_hz", "mechanics.gamma_hz", "environment.temperature_k"];
    let t_coh = coherence_time(&mode, &env)?;
    let n_th = emech::system::thermal_occupation(temp, mode.omega_m)?;
    out.push(Derived::new(
        "n_th",
        n_th,
        "quanta",
        "Bose occupation at Omega_m",
        &["mechanics.frequency_hz", "environment.temperature_k"],
    ));
    out.push(Derived::new("coherence_time", t_coh.seconds(), "s", "1 / (n_th Gamma_m)", &with_t));
    if reg.get("mechanics.mass_kg").is_some() {
        out.push(Derived::new(
            "force_noise",
            force_noise_density(&mode, temp)?,
            "N/Hz^0.5",
            "sqrt(4 m Gamma_m k_B T)",
            &["mechanics.mass_kg", "mechanics.gamma_hz", "environment.temperature_k"],
        ));
    }
    if let (Some(g), Some(k)) = (reg.get("coupling.g_hz"), reg.get("cavity.kappa_hz")) {
        let gamma_e = resolved_sideband_damping(hz_to_angular(g), hz_to_angular(k));
        if n_th > 0.0 {
            let c = cooperativities(gamma_e, mode.gamma_m, n_th)?;
            let src = ["coupling.g_hz", "cavity.kappa_hz", "mechanics.gamma_hz"];
            out.push(Derived::new("cooperativity", c.classical, "1", "4 g^2 / (kappa Gamma_m)", &src));
            out.push(Derived::new(
                "quantum_cooperativity",
                c.quantum,
                "1",
                "C / n_th",
                &["coupling.g_hz", "cavity.kappa_hz", "mechanics.gamma_hz", "environment.temperature_k"],
            ));
        }
    }
    if let Some(c) = reg.get("cooling.n_tilde_at_p0_quanta").filter(|&c| c > 0.0) {
        let (r, n_min) = optimal_cooling(n_th, c)?;
        let src = ["cooling.n_tilde_at_p0_quanta", "mechanics.frequency_hz", "environment.temperature_k"];
        out.push(Derived::new("n_bar_min", n_min, "quanta", "minimum of (n_th + c r^2) / (1 + r)", &src));
        out.push(Derived::new("optimal_power_ratio", r, "1", "argmin P / P0", &src));
    }
    Ok(out)
}

pub fn run(ctx: &Ctx, inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    if inputs.is_empty() {
        return Err(Failure::Input(anyhow!(
            "no inputs: pass config (.toml) and report (.json) files to summarize"
        )));
    }
    let mut sorted = inputs.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut reg = Registry::default();
    let mut digests: Vec<InputDigest> = Vec::new();
    for p in &sorted {
        let (text, d) = read_input(p)?;
        digests.push(d);
        load(&mut reg, p, &text)?;
    }
    let mut report = ctx.report("report", digests);
    report.derived = derive(&reg)?;
    report.warnings = std::mem::take(&mut reg.warnings);
    report.parameters = reg.params.into_values().collect();
    Ok(vec![ctx.write_report("summary", &report)?])
}

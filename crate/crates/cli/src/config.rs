//! TOML pipeline configuration. Every physical key carries its unit as a
//! suffix (`_hz`, `_s`, `_k`, `_w`, `_dbm`, `_kg`, `_m`, `_f`, `_rad`,
//! `_quanta`); unknown keys are rejected so a unit typo cannot slip through.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use emech::estimate::CouplingHint;
use emech::system::dbm_to_watts;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub cavity: Option<CavitySection>,
    #[serde(default)]
    pub mechanics: Option<MechanicsSection>,
    #[serde(default)]
    pub environment: Option<EnvironmentSection>,
    #[serde(default)]
    pub coupling: Option<CouplingSection>,
    #[serde(default)]
    pub pump: Option<PumpSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub calibration: Option<CalibrationSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub cooling: Option<CoolingSection>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub frequency_hz: f64,
    pub kappa_hz: f64,
    pub kappa_ex_hz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsSection {
    pub frequency_hz: f64,
    pub gamma_hz: Option<f64>,
    pub mass_kg: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub temperature_k: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    /// Linearized coupling g = g0√n.
    pub g_hz: Option<f64>,
    pub detuning_hz: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub gamma_m_hz: f64,
    pub p0_dbm: Option<f64>,
    pub p0_w: Option<f64>,
}

impl PumpSection {
    pub fn p0_watts(&self) -> Result<f64> {
        match (self.p0_w, self.p0_dbm) {
            (Some(w), None) => Ok(w),
            (None, Some(d)) => Ok(dbm_to_watts(d)?),
            (Some(_), Some(_)) => bail!("[pump]: give either p0_w or p0_dbm, not both"),
            (None, None) => bail!("[pump]: p0_w or p0_dbm is required"),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub n_add_quanta: f64,
    #[serde(default)]
    pub n_tilde_quanta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    /// Phonons per unit sideband area.
    pub quanta_per_area: Option<f64>,
    #[serde(default)]
    pub quanta_per_area_std: f64,
    /// JSON report from `fit thermal` to take the constant from.
    pub thermal_report: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// `over` or `under`, for magnitude-only reflection traces.
    pub coupling_hint: Option<String>,
    pub tls_reference_k: Option<f64>,
    pub drift_smoothing_s: Option<f64>,
    pub thermal_threshold_k: Option<f64>,
    #[serde(default)]
    pub include_below_threshold: bool,
    pub pm_depth_rad: Option<f64>,
    pub modulation_frequency_hz: Option<f64>,
    /// Restrict a spectrum fit to this window around its peak.
    pub spectrum_half_span_hz: Option<f64>,
}

impl FitSection {
    pub fn hint(&self) -> Result<Option<CouplingHint>> {
        match self.coupling_hint.as_deref() {
            None => Ok(None),
            Some("over") => Ok(Some(CouplingHint::Over)),
            Some("under") => Ok(Some(CouplingHint::Under)),
            Some(other) => bail!("[fit] coupling_hint must be `over` or `under`, got `{other}`"),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub spectrum: Option<SpectrumSim>,
    pub ringdown: Option<RingdownSim>,
    pub trajectory: Option<TrajectorySim>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumModel {
    #[default]
    Rwa,
    Full,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSim {
    #[serde(default)]
    pub model: SpectrumModel,
    /// Grid half-width around Ω_eff, in units of Γ_eff.
    #[serde(default = "default_span_linewidths")]
    pub half_span_linewidths: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_span_linewidths() -> f64 {
    20.0
}

fn default_points() -> usize {
    801
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingdownSim {
    pub excite_duration_s: f64,
    pub amplify_duration_s: f64,
    pub decay_duration_s: f64,
    /// Amplitude growth rate of the coherent drive, 1/s.
    pub excite_rate_per_s: f64,
    pub gamma_blue_hz: f64,
    pub gamma_red_hz: f64,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub initial_amplitude: f64,
    /// Std of additive complex noise on I and Q.
    #[serde(default)]
    pub noise_std: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySim {
    pub gamma_eff_hz: f64,
    #[serde(default)]
    pub offset_hz: f64,
    pub occupation_quanta: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// Welch segment length; the PSD is written next to the trace.
    pub segment_s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingSection {
    /// Thermal occupation at the bath; derived from [environment] and
    /// [mechanics] when absent.
    pub n_th_quanta: Option<f64>,
    /// Cavity noise ñ at P = P0; ñ grows linearly with power.
    #[serde(default)]
    pub n_tilde_at_p0_quanta: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    #[serde(default = "default_sweep_points")]
    pub points: usize,
}

fn default_sweep_points() -> usize {
    401
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Config =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()
            .with_context(|| format!("validating config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn validate(&self) -> Result<()> {
        fn pos(section: &str, key: &str, v: f64) -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                bail!("[{section}] {key} must be positive, got {v}");
            }
            Ok(())
        }
        fn nonneg(section: &str, key: &str, v: f64) -> Result<()> {
            if !(v.is_finite() && v >= 0.0) {
                bail!("[{section}] {key} must be non-negative, got {v}");
            }
            Ok(())
        }
        if let Some(c) = &self.cavity {
            pos("cavity", "frequency_hz", c.frequency_hz)?;
            pos("cavity", "kappa_hz", c.kappa_hz)?;
            pos("cavity", "kappa_ex_hz", c.kappa_ex_hz)?;
            if c.kappa_ex_hz > c.kappa_hz {
                bail!("[cavity] kappa_ex_hz exceeds kappa_hz");
            }
        }
        if let Some(m) = &self.mechanics {
            pos("mechanics", "frequency_hz", m.frequency_hz)?;
            if let Some(g) = m.gamma_hz {
                pos("mechanics", "gamma_hz", g)?;
            }
            if let Some(kg) = m.mass_kg {
                pos("mechanics", "mass_kg", kg)?;
            }
        }
        if let Some(e) = &self.environment {
            nonneg("environment", "temperature_k", e.temperature_k)?;
        }
        if let Some(p) = &self.pump {
            pos("pump", "gamma_m_hz", p.gamma_m_hz)?;
            pos("pump", "p0", p.p0_watts()?)?;
        }
        nonneg("noise", "n_add_quanta", self.noise.n_add_quanta)?;
        nonneg("noise", "n_tilde_quanta", self.noise.n_tilde_quanta)?;
        if let Some(c) = &self.calibration {
            if let Some(q) = c.quanta_per_area {
                pos("calibration", "quanta_per_area", q)?;
            }
            nonneg("calibration", "quanta_per_area_std", c.quanta_per_area_std)?;
            if let Some(p) = &c.thermal_report {
                let full = self.resolve(p);
                if !full.is_file() {
                    bail!("[calibration] thermal_report {} does not exist", full.display());
                }
            }
        }
        self.fit.hint()?;
        if let Some(c) = &self.cooling {
            if c.p_max_dbm <= c.p_min_dbm {
                bail!("[cooling] p_max_dbm must exceed p_min_dbm");
            }
            if c.points < 2 {
                bail!("[cooling] points must be at least 2");
            }
            nonneg("cooling", "n_tilde_at_p0_quanta", c.n_tilde_at_p0_quanta)?;
        }
        Ok(())
    }

    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section
            .as_ref()
            .with_context(|| format!("config section [{name}] is required for this command"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsuffixed_keys() {
        let err = toml::from_str::<Config>("[cavity]\nfrequency = 5e9\n").unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
    }

    #[test]
    fn pump_power_either_unit() {
        let p: PumpSection = toml::from_str("gamma_m_hz = 1e-3\np0_dbm = -30.0").unwrap();
        assert!((p.p0_watts().unwrap() - 1e-6).abs() < 1e-18);
        let both: PumpSection = toml::from_str("gamma_m_hz = 1e-3\np0_dbm = -30.0\np0_w = 1e-6").unwrap();
        assert!(both.p0_watts().is_err());
    }
}

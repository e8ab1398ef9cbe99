//! Physical constants, unit conversions and the parameter types shared by
//! every other module.
//!
//! Internally all frequencies and rates are angular (rad/s). Conversions to
//! and from Hz, dBm and friends happen only at I/O boundaries through the
//! helpers in this module.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};

/// CODATA 2018 values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Vacuum permittivity, F/m.
    pub epsilon0: f64,
}

pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    k_b: 1.380_649e-23,
    epsilon0: 8.854_187_812_8e-12,
};

pub const HBAR: f64 = CODATA_2018.hbar;
pub const K_B: f64 = CODATA_2018.k_b;
pub const EPSILON_0: f64 = CODATA_2018.epsilon0;

#[inline]
pub fn hz_to_angular(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

#[inline]
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

pub fn dbm_to_watts(p_dbm: f64) -> Result<f64> {
    finite("power_dbm", p_dbm)?;
    Ok(1e-3 * 10f64.powf(p_dbm / 10.0))
}

pub fn watts_to_dbm(p_w: f64) -> Result<f64> {
    positive("power_w", p_w)?;
    Ok(10.0 * (p_w / 1e-3).log10())
}

/// Power reaching the device after a line with `attenuation_db` of loss.
pub fn attenuate_dbm(source_dbm: f64, attenuation_db: f64) -> Result<f64> {
    finite("source_dbm", source_dbm)?;
    non_negative("attenuation_db", attenuation_db)?;
    Ok(source_dbm - attenuation_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub omega_c: f64,
    pub kappa: f64,
    pub kappa_ex: f64,
}

impl CavityParams {
    pub fn new(omega_c: f64, kappa: f64, kappa_ex: f64) -> Result<Self> {
        positive("omega_c", omega_c)?;
        positive("kappa", kappa)?;
        positive("kappa_ex", kappa_ex)?;
        if kappa_ex > kappa {
            return Err(Error::InvalidParameter {
                name: "kappa_ex",
                reason: format!("external rate {kappa_ex} exceeds total linewidth {kappa}"),
            });
        }
        Ok(Self {
            omega_c,
            kappa,
            kappa_ex,
        })
    }

    pub fn from_hz(f_c: f64, kappa_hz: f64, kappa_ex_hz: f64) -> Result<Self> {
        Self::new(
            hz_to_angular(f_c),
            hz_to_angular(kappa_hz),
            hz_to_angular(kappa_ex_hz),
        )
    }

    /// Coupling efficiency κ_ex/κ.
    pub fn eta(&self) -> f64 {
        self.kappa_ex / self.kappa
    }

    /// Internal loss rate κ − κ_ex.
    pub fn kappa_0(&self) -> f64 {
        self.kappa - self.kappa_ex
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanicalMode {
    pub omega_m: f64,
    /// Energy decay rate.
    pub gamma_m: f64,
    /// Effective mode mass in kg, needed only for force noise and x_zpf.
    pub mass: Option<f64>,
}

impl MechanicalMode {
    pub fn new(omega_m: f64, gamma_m: f64, mass: Option<f64>) -> Result<Self> {
        positive("omega_m", omega_m)?;
        positive("gamma_m", gamma_m)?;
        if let Some(m) = mass {
            positive("mass", m)?;
        }
        Ok(Self {
            omega_m,
            gamma_m,
            mass,
        })
    }

    pub fn from_hz(f_m: f64, gamma_hz: f64, mass: Option<f64>) -> Result<Self> {
        Self::new(hz_to_angular(f_m), hz_to_angular(gamma_hz), mass)
    }

    pub fn mass(&self) -> Result<f64> {
        self.mass.ok_or(Error::MissingMass)
    }

    /// Zero-point displacement √(ħ / 2mΩ_m).
    pub fn x_zpf(&self) -> Result<f64> {
        Ok((HBAR / (2.0 * self.mass()? * self.omega_m)).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    /// Power at the device input, W.
    pub power_at_device: f64,
    /// Δ = ω_p − ω_c, rad/s.
    pub detuning: f64,
    /// Line attenuation between source and device, dB.
    pub attenuation_db: f64,
}

impl Drive {
    pub fn new(power_at_device: f64, detuning: f64, attenuation_db: f64) -> Result<Self> {
        non_negative("power_at_device", power_at_device)?;
        finite("detuning", detuning)?;
        non_negative("attenuation_db", attenuation_db)?;
        Ok(Self {
            power_at_device,
            detuning,
            attenuation_db,
        })
    }

    pub fn from_source_dbm(source_dbm: f64, attenuation_db: f64, detuning: f64) -> Result<Self> {
        let at_device = dbm_to_watts(attenuate_dbm(source_dbm, attenuation_db)?)?;
        Self::new(at_device, detuning, attenuation_db)
    }

    /// Pump angular frequency ω_c + Δ.
    pub fn omega_p(&self, cavity: &CavityParams) -> f64 {
        cavity.omega_c + self.detuning
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub temperature: f64,
}

impl Environment {
    pub fn new(temperature: f64) -> Result<Self> {
        non_negative("temperature", temperature)?;
        Ok(Self { temperature })
    }
}

/// Everything needed to evaluate the linearized electromechanical model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub cavity: CavityParams,
    pub mode: MechanicalMode,
    /// Single-photon coupling g0, rad/s.
    pub g0: f64,
    pub drive: Drive,
    pub environment: Environment,
}

/// Bose-Einstein occupation of a mode at angular frequency `omega`.
pub fn thermal_occupation(temperature: f64, omega: f64) -> Result<f64> {
    non_negative("temperature", temperature)?;
    positive("omega", omega)?;
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (K_B * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Inverse of [`thermal_occupation`]: the temperature at which a mode at
/// `omega` holds `occupation` quanta on average.
pub fn temperature_from_occupation(occupation: f64, omega: f64) -> Result<f64> {
    non_negative("occupation", occupation)?;
    positive("omega", omega)?;
    if occupation == 0.0 {
        return Ok(0.0);
    }
    Ok(HBAR * omega / (K_B * (1.0 / occupation).ln_1p()))
}

pub fn quality_factor(mode: &MechanicalMode) -> f64 {
    mode.omega_m / mode.gamma_m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoherenceTime {
    /// Zero bath temperature: no thermal decoherence.
    Infinite,
    Finite {
        /// 1/(n̄_th Γ_m) with the exact Bose occupation, s.
        seconds: f64,
        /// ħQ/(k_B T), the high-temperature form, s.
        high_temperature: f64,
        /// Bath occupation used for `seconds`.
        n_th: f64,
    },
}

impl CoherenceTime {
    pub fn seconds(&self) -> f64 {
        match self {
            CoherenceTime::Infinite => f64::INFINITY,
            CoherenceTime::Finite { seconds, .. } => *seconds,
        }
    }

    /// Relative difference between the exact and high-temperature forms.
    pub fn form_disagreement(&self) -> f64 {
        match self {
            CoherenceTime::Infinite => 0.0,
            CoherenceTime::Finite {
                seconds,
                high_temperature,
                ..
            } => (seconds - high_temperature).abs() / seconds,
        }
    }
}

/// Thermal coherence time of `mode` coupled to `env`.
///
/// When the bath holds more than 100 quanta the exact and ħQ/k_BT forms
/// must agree to 0.1%; a larger disagreement there indicates corrupted
/// inputs and is reported as an error.
pub fn coherence_time(mode: &MechanicalMode, env: &Environment) -> Result<CoherenceTime> {
    if env.temperature == 0.0 {
        return Ok(CoherenceTime::Infinite);
    }
    let n_th = thermal_occupation(env.temperature, mode.omega_m)?;
    let seconds = 1.0 / (n_th * mode.gamma_m);
    let high_temperature = HBAR * quality_factor(mode) / (K_B * env.temperature);
    let t = CoherenceTime::Finite {
        seconds,
        high_temperature,
        n_th,
    };
    if n_th > 100.0 && t.form_disagreement() > 1e-3 {
        return Err(Error::NoSolution(format!(
            "coherence-time forms disagree by {:.3e} at n_th = {n_th}",
            t.form_disagreement()
        )));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn device_mode() -> MechanicalMode {
        MechanicalMode::from_hz(1.486e6, 1.0e-3, Some(15e-12)).unwrap()
    }

    #[test]
    fn dbm_examples() {
        assert_relative_eq!(dbm_to_watts(0.0).unwrap(), 1e-3, max_relative = 1e-15);
        assert_relative_eq!(dbm_to_watts(-56.5).unwrap(), 2.239e-9, max_relative = 1e-3);
        assert_relative_eq!(attenuate_dbm(10.0, 66.5).unwrap(), -56.5);
        assert!(dbm_to_watts(f64::NAN).is_err());
        assert!(dbm_to_watts(f64::INFINITY).is_err());
        assert!(watts_to_dbm(0.0).is_err());
    }

    #[test]
    fn occupation_limits() {
        let w = hz_to_angular(1.486e6);
        assert_eq!(thermal_occupation(0.0, w).unwrap(), 0.0);
        let t = HBAR * w / (K_B * 2f64.ln());
        assert_relative_eq!(thermal_occupation(t, w).unwrap(), 1.0, max_relative = 1e-12);
        assert!(thermal_occupation(1.0, 0.0).is_err());
        assert!(thermal_occupation(1.0, -1.0).is_err());
        // direct Bose evaluation at 80 mK
        let n = thermal_occupation(0.080, w).unwrap();
        assert!((n - 1121.0).abs() <= 1.0, "n = {n}");
    }

    #[test]
    fn occupation_high_temperature_limit() {
        let w = hz_to_angular(1.486e6);
        for t in [0.1, 0.5, 1.0, 4.0] {
            let n = thermal_occupation(t, w).unwrap();
            assert!(n > 100.0);
            let approx = K_B * t / (HBAR * w) - 0.5;
            assert!((n - approx).abs() / n < 1e-3);
        }
    }

    #[test]
    fn coherence_time_examples() {
        let env = Environment::new(0.080).unwrap();
        let t = coherence_time(&device_mode(), &env).unwrap();
        assert!((t.seconds() - 0.142).abs() < 0.001, "{t:?}");
        assert!(t.form_disagreement() < 1e-3);

        let doubled = MechanicalMode::from_hz(1.486e6, 2.0e-3, None).unwrap();
        let t2 = coherence_time(&doubled, &env).unwrap();
        assert_relative_eq!(t2.seconds(), t.seconds() / 2.0, max_relative = 1e-12);

        let hot = coherence_time(&device_mode(), &Environment::new(0.160).unwrap()).unwrap();
        assert!((hot.seconds() - 0.071).abs() / 0.071 < 0.01);

        let cold = coherence_time(&device_mode(), &Environment::new(0.0).unwrap()).unwrap();
        assert_eq!(cold, CoherenceTime::Infinite);
        assert!(cold.seconds().is_infinite());
    }

    #[test]
    fn quality_factor_examples() {
        assert_relative_eq!(quality_factor(&device_mode()), 1.486e9, max_relative = 1e-12);
        let second = MechanicalMode::from_hz(1.487e6, 2.13e-3, None).unwrap();
        assert!((quality_factor(&second) - 6.98e8).abs() / 6.98e8 < 1e-3);
        let unity = MechanicalMode::new(3.0, 3.0, None).unwrap();
        assert_eq!(quality_factor(&unity), 1.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(CavityParams::from_hz(8.349e9, 226e3, 300e3).is_err());
        let c = CavityParams::from_hz(8.349e9, 226e3, 183e3).unwrap();
        assert!((c.eta() - 0.81).abs() < 0.005);
        assert_relative_eq!(c.kappa_0(), hz_to_angular(43e3), max_relative = 1e-12);
        assert!(MechanicalMode::new(1.0, 0.0, None).is_err());
        assert!(device_mode().x_zpf().is_ok());
        assert_eq!(
            MechanicalMode::new(1.0, 1.0, None).unwrap().x_zpf(),
            Err(Error::MissingMass)
        );
        assert!(Environment::new(-1.0).is_err());
        assert!(Drive::new(-1.0, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn dbm_round_trip(p in -200.0f64..60.0) {
            let back = watts_to_dbm(dbm_to_watts(p).unwrap()).unwrap();
            prop_assert!((back - p).abs() <= 1e-12 * p.abs().max(1.0));
        }

        #[test]
        fn hz_round_trip(f in 1e-6f64..1e12) {
            let back = angular_to_hz(hz_to_angular(f));
            prop_assert!((back - f).abs() / f < 1e-15);
        }

        #[test]
        fn occupation_monotone(t in 1e-3f64..10.0, f in 1e3f64..1e10, scale in 1.001f64..3.0) {
            let w = hz_to_angular(f);
            let n = thermal_occupation(t, w).unwrap();
            prop_assert!(thermal_occupation(t * scale, w).unwrap() > n);
            prop_assert!(thermal_occupation(t, w * scale).unwrap() < n);
        }

        #[test]
        fn occupation_temperature_inverse(t in 1e-3f64..10.0, f in 1e3f64..1e10) {
            let w = hz_to_angular(f);
            let n = thermal_occupation(t, w).unwrap();
            let back = temperature_from_occupation(n, w).unwrap();
            prop_assert!((back - t).abs() / t < 1e-9);
        }
    }
}

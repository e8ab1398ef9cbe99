//! Cavity susceptibilities and the dynamical-backaction quantities built on
//! them: intracavity photon number, optical damping and spring shift,
//! cooperativities and the linear damping-versus-power law.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Result};
use crate::system::{CavityParams, Drive, HBAR};

/// a_± = 1/(κ/2 − i(Δ ± Ω_m)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibilities {
    pub a_plus: Complex64,
    pub a_minus: Complex64,
}

impl Susceptibilities {
    /// |a_+|² + |a_−|².
    pub fn norm_sqr_sum(&self) -> f64 {
        self.a_plus.norm_sqr() + self.a_minus.norm_sqr()
    }
}

pub fn susceptibilities(delta: f64, omega_m: f64, kappa: f64) -> Result<Susceptibilities> {
    positive("kappa", kappa)?;
    finite("delta", delta)?;
    finite("omega_m", omega_m)?;
    let half = kappa / 2.0;
    Ok(Susceptibilities {
        a_plus: Complex64::new(half, -(delta + omega_m)).inv(),
        a_minus: Complex64::new(half, -(delta - omega_m)).inv(),
    })
}

/// Mean intracavity photon number n = P κ_ex / (ħ ω_p ((κ/2)² + Δ²)).
pub fn intracavity_photons(drive: &Drive, cavity: &CavityParams) -> f64 {
    let omega_p = drive.omega_p(cavity);
    let lorentz = (cavity.kappa / 2.0).powi(2) + drive.detuning.powi(2);
    drive.power_at_device * cavity.kappa_ex / (HBAR * omega_p * lorentz)
}

/// Linearized coupling g = g0 √n.
pub fn coupled_rate(g0: f64, photons: f64) -> Result<f64> {
    non_negative("photons", photons)?;
    Ok(g0 * photons.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackactionResult {
    /// Optical damping Γ_e; negative under blue detuning.
    pub gamma_e: f64,
    /// Optical spring shift Ω_e.
    pub omega_e: f64,
    pub gamma_eff: f64,
    pub omega_eff: f64,
    /// Set when Γ_eff ≥ κ/10, outside the adiabatic weak-coupling regime.
    pub strong_coupling_warning: bool,
}

/// Γ_e = −2g² Re[a_−* − a_+], Ω_e = −g² Im[a_−* − a_+].
pub fn backaction_rates(
    g: f64,
    delta: f64,
    omega_m: f64,
    kappa: f64,
    gamma_m: f64,
) -> Result<BackactionResult> {
    non_negative("g", g)?;
    non_negative("gamma_m", gamma_m)?;
    let chi = susceptibilities(delta, omega_m, kappa)?;
    let diff = chi.a_minus.conj() - chi.a_plus;
    let g2 = g * g;
    let gamma_e = -2.0 * g2 * diff.re;
    let omega_e = -g2 * diff.im;
    let gamma_eff = gamma_m + gamma_e;
    Ok(BackactionResult {
        gamma_e,
        omega_e,
        gamma_eff,
        omega_eff: omega_m + omega_e,
        strong_coupling_warning: gamma_e.abs() >= kappa / 10.0,
    })
}

/// Resolved-sideband approximation 4g²/κ of the optical damping at Δ = −Ω_m.
pub fn resolved_sideband_damping(g: f64, kappa: f64) -> f64 {
    4.0 * g * g / kappa
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cooperativity {
    /// C = Γ_e/Γ_m.
    pub classical: f64,
    /// C_q = C/n̄_th.
    pub quantum: f64,
}

pub fn cooperativities(gamma_e: f64, gamma_m: f64, n_th: f64) -> Result<Cooperativity> {
    positive("gamma_e", gamma_e)?;
    positive("gamma_m", gamma_m)?;
    positive("n_th", n_th)?;
    let classical = gamma_e / gamma_m;
    Ok(Cooperativity {
        classical,
        quantum: classical / n_th,
    })
}

/// Γ_eff(P) = Γ_m (1 + P/P_0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpModel {
    pub gamma_m: f64,
    /// Corner power at which Γ_e = Γ_m, W.
    pub p0: f64,
}

impl PumpModel {
    pub fn new(gamma_m: f64, p0: f64) -> Result<Self> {
        positive("gamma_m", gamma_m)?;
        positive("p0", p0)?;
        Ok(Self { gamma_m, p0 })
    }

    pub fn gamma_e(&self, power: f64) -> f64 {
        self.gamma_m * power / self.p0
    }
}

pub fn gamma_eff_of_power(power: f64, model: &PumpModel) -> Result<f64> {
    non_negative("power", power)?;
    Ok(model.gamma_m + model.gamma_e(power))
}

//! Steady-state phonon occupation under sideband cooling, cooling curves,
//! force sensitivity, isolator transmissibility and the dephasing budget.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::backaction::PumpModel;
use crate::error::{non_negative, positive, Error, Result};
use crate::system::{MechanicalMode, K_B};

/// n̄ = (Γ_m n̄_th + Γ_e ñ)/(Γ_m + Γ_e).
pub fn occupation_from_rates(gamma_m: f64, gamma_e: f64, n_th: f64, n_tilde: f64) -> Result<f64> {
    positive("gamma_m", gamma_m)?;
    non_negative("gamma_e", gamma_e)?;
    non_negative("n_th", n_th)?;
    non_negative("n_tilde", n_tilde)?;
    Ok((gamma_m * n_th + gamma_e * n_tilde) / (gamma_m + gamma_e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingPoint {
    pub power: f64,
    pub gamma_e: f64,
    pub n_tilde: f64,
    pub n_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingCurve {
    pub points: Vec<CoolingPoint>,
    /// Index of the lowest occupation in `points`.
    pub min_index: usize,
}

impl CoolingCurve {
    pub fn minimum(&self) -> &CoolingPoint {
        &self.points[self.min_index]
    }
}

/// Occupation along a power sweep with cavity heating ñ(P) = `noise_slope`·P.
pub fn cooling_curve(
    powers: &[f64],
    pump: &PumpModel,
    n_th: f64,
    noise_slope: f64,
) -> Result<CoolingCurve> {
    if powers.is_empty() {
        return Err(Error::InsufficientData("empty power sweep".into()));
    }
    non_negative("noise_slope", noise_slope)?;
    let points = powers
        .iter()
        .map(|&p| {
            non_negative("power", p)?;
            let gamma_e = pump.gamma_e(p);
            let n_tilde = noise_slope * p;
            Ok(CoolingPoint {
                power: p,
                gamma_e,
                n_tilde,
                n_bar: occupation_from_rates(pump.gamma_m, gamma_e, n_th, n_tilde)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_index = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.n_bar.total_cmp(&b.1.n_bar))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(CoolingCurve { points, min_index })
}

/// Exact optimum of n̄(r) = (n̄_th + c r²)/(1 + r) with r = P/P_0 and
/// c = ñ(P_0). Returns (r*, n̄_min).
pub fn optimal_cooling(n_th: f64, noise_at_p0: f64) -> Result<(f64, f64)> {
    positive("noise_at_p0", noise_at_p0)?;
    non_negative("n_th", n_th)?;
    let c = noise_at_p0;
    // dn/dr = 0  ⇔  c r² + 2c r − n̄_th = 0
    let r = -1.0 + (1.0 + n_th / c).sqrt();
    Ok((r, (n_th + c * r * r) / (1.0 + r)))
}

/// √S_FF = √(4 m Γ_m k_B T), single-sided, N/√Hz.
pub fn force_noise_density(mode: &MechanicalMode, temperature: f64) -> Result<f64> {
    non_negative("temperature", temperature)?;
    let m = mode.mass()?;
    Ok((4.0 * m * mode.gamma_m * K_B * temperature).sqrt())
}

/// Mass-on-springs isolator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Isolator {
    /// Combined spring constant, N/m.
    pub k_total: f64,
    pub mass: f64,
    /// Damping ratio ζ; zero for the ideal undamped stage.
    pub damping_ratio: f64,
}

impl Isolator {
    pub fn new(k_total: f64, mass: f64) -> Result<Self> {
        positive("k_total", k_total)?;
        positive("mass", mass)?;
        Ok(Self {
            k_total,
            mass,
            damping_ratio: 0.0,
        })
    }

    pub fn with_damping(mut self, zeta: f64) -> Result<Self> {
        self.damping_ratio = non_negative("damping_ratio", zeta)?;
        Ok(self)
    }

    /// Corner frequency (1/2π)√(k/m), Hz.
    pub fn corner_frequency(&self) -> f64 {
        (self.k_total / self.mass).sqrt() / (2.0 * PI)
    }

    /// Displacement transmissibility at `f` Hz.
    pub fn transmissibility(&self, f: f64) -> Result<f64> {
        positive("f", f)?;
        let r = f / self.corner_frequency();
        let z = self.damping_ratio;
        let num = 1.0 + (2.0 * z * r).powi(2);
        let den = (1.0 - r * r).powi(2) + (2.0 * z * r).powi(2);
        if den == 0.0 {
            return Err(Error::Resonance);
        }
        Ok((num / den).sqrt())
    }
}

/// Undamped transmissibility f_0²/|f_0² − f²|.
pub fn vibration_transmissibility(f: f64, k_total: f64, mass: f64) -> Result<f64> {
    Isolator::new(k_total, mass)?.transmissibility(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingBudget {
    pub gamma_spectral: f64,
    pub gamma_ringdown: f64,
    /// (Γ_spec − Γ_rd)/Γ_spec at the central values.
    pub excess_fraction: f64,
    /// Same ratio with Γ_spec + σ and Γ_rd − σ.
    pub worst_case_fraction: f64,
    /// Spectral width below the energy decay rate.
    pub inconsistent: bool,
}

pub fn dephasing_budget(
    gamma_spectral: f64,
    gamma_ringdown: f64,
    sigma_spectral: f64,
    sigma_ringdown: f64,
) -> Result<DephasingBudget> {
    positive("gamma_spectral", gamma_spectral)?;
    positive("gamma_ringdown", gamma_ringdown)?;
    non_negative("sigma_spectral", sigma_spectral)?;
    non_negative("sigma_ringdown", sigma_ringdown)?;
    let inconsistent = gamma_spectral < gamma_ringdown;
    let excess = |spec: f64, rd: f64| ((spec - rd) / spec).clamp(0.0, 1.0);
    Ok(DephasingBudget {
        gamma_spectral,
        gamma_ringdown,
        excess_fraction: excess(gamma_spectral, gamma_ringdown),
        worst_case_fraction: excess(
            gamma_spectral + sigma_spectral,
            (gamma_ringdown - sigma_ringdown).max(0.0),
        ),
        inconsistent,
    })
}

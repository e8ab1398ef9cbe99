//! Temperature-sweep calibrations: sideband area against thermal occupation,
//! and g0 from the mechanical/calibration-tone area ratio.
//!
//! For the g0 calibration a phase modulation of depth φ at ω_mod puts
//! frequency-noise variance φ²ω_mod²/2 on the tone, while thermal motion puts
//! g0²(2n̄_th + 1) ≈ 2g0²n̄_th on the cavity frequency. The area ratio R is
//! the ratio of these variances, so g0² = (φ²ω_mod²/4)·R/n̄_th. Using the
//! slope of R against n̄_th averages over the sweep and drops any offset.

use serde::{Deserialize, Serialize};

use super::curves::fit_affine;
use super::report::{FitReport, Termination, Unit};
use crate::error::{finite, positive, Error, Result};
use crate::system::{temperature_from_occupation, thermal_occupation};

/// Below this temperature the mode is not assumed to follow the fridge.
pub const DEFAULT_THERMALIZATION_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalPoint {
    pub temperature: f64,
    pub area: f64,
    /// Backaction correction Γ_eff/Γ_m multiplying the raw area.
    pub correction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstant {
    /// Mechanical quanta per unit of sideband area.
    pub quanta_per_area: f64,
    pub quanta_per_area_std: f64,
    /// Lowest temperature used in the fit.
    pub valid_above: f64,
    /// Bath temperature inferred from the base-temperature point.
    pub bath_extrapolation: f64,
    pub bath_extrapolation_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalOptions {
    pub threshold: f64,
    /// Keep points below the threshold in the fit.
    pub include_below: bool,
}

impl Default for ThermalOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THERMALIZATION_THRESHOLD,
            include_below: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalCalibration {
    pub constant: CalibrationConstant,
    /// Corrected area against n̄_th: slope in area per quantum.
    pub fit: FitReport,
    pub base_temperature: f64,
    pub base_occupation: f64,
    /// Temperatures left out of the fit.
    pub excluded: Vec<f64>,
}

fn split_thermalized<T: Copy>(
    items: &[T],
    temperature: impl Fn(&T) -> f64,
    threshold: f64,
    include_below: bool,
) -> (Vec<T>, Vec<f64>) {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for it in items {
        let t = temperature(it);
        if include_below || t >= threshold {
            used.push(*it);
        } else {
            excluded.push(t);
        }
    }
    (used, excluded)
}

pub fn thermal_calibration(
    points: &[ThermalPoint],
    omega_m: f64,
    opts: &ThermalOptions,
) -> Result<ThermalCalibration> {
    positive("omega_m", omega_m)?;
    for p in points {
        positive("temperature", p.temperature)?;
        finite("area", p.area)?;
        positive("correction", p.correction)?;
    }
    let (used, excluded) =
        split_thermalized(points, |p| p.temperature, opts.threshold, opts.include_below);
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} points at or above {} K; need at least 3",
            used.len(),
            opts.threshold
        )));
    }
    let n_th: Vec<f64> = used
        .iter()
        .map(|p| thermal_occupation(p.temperature, omega_m))
        .collect::<Result<_>>()?;
    let corrected: Vec<f64> = used.iter().map(|p| p.area * p.correction).collect();
    let mut fit = fit_affine(&n_th, &corrected, None)?;
    for p in &mut fit.parameters {
        p.unit = Unit::Other(if p.name == "slope" { "area/quanta" } else { "area" }.into());
    }
    let (s, b) = (fit.value("slope"), fit.value("intercept"));
    if !(s > 0.0) {
        return Err(Error::FitFailed(format!(
            "area decreases with occupation (slope {s:.4e})"
        )));
    }
    let base = points
        .iter()
        .min_by(|a, b| a.temperature.total_cmp(&b.temperature))
        .expect("at least three points");
    let a0 = base.area * base.correction;
    let n_base = (a0 - b) / s;
    if !(n_base > 0.0) {
        return Err(Error::FitFailed(format!(
            "base-temperature area {a0:.4e} lies below the fitted intercept"
        )));
    }
    // n_base = (a0 − b)/s
    let (d_s, d_b) = (-(a0 - b) / (s * s), -1.0 / s);
    let var_n = d_s * d_s * fit.cov(0, 0) + 2.0 * d_s * d_b * fit.cov(0, 1) + d_b * d_b * fit.cov(1, 1);
    let t_bath = temperature_from_occupation(n_base, omega_m)?;
    // dT/dn from a symmetric difference of the inverse occupation
    let h = 1e-6 * n_base;
    let dtdn = (temperature_from_occupation(n_base + h, omega_m)?
        - temperature_from_occupation((n_base - h).max(n_base * 0.5), omega_m)?)
        / (2.0 * h);
    let valid_above = used
        .iter()
        .map(|p| p.temperature)
        .fold(f64::INFINITY, f64::min);
    Ok(ThermalCalibration {
        constant: CalibrationConstant {
            quanta_per_area: 1.0 / s,
            quanta_per_area_std: fit.std_error("slope") / (s * s),
            valid_above,
            bath_extrapolation: t_bath,
            bath_extrapolation_std: dtdn.abs() * var_n.max(0.0).sqrt(),
        },
        fit,
        base_temperature: base.temperature,
        base_occupation: n_base,
        excluded,
    })
}

/// g0 from area ratios R(T) (already backaction-corrected) of the
/// mechanical sideband to a phase-modulation tone of depth `pm_depth` at
/// `omega_mod`. Points below `threshold` are excluded.
pub fn gorodetsky_g0(
    temperature: &[f64],
    ratio: &[f64],
    pm_depth: f64,
    omega_mod: f64,
    omega_m: f64,
    threshold: f64,
) -> Result<FitReport> {
    positive("pm_depth", pm_depth)?;
    positive("omega_mod", omega_mod)?;
    positive("omega_m", omega_m)?;
    if temperature.len() != ratio.len() {
        return Err(Error::InvalidParameter {
            name: "ratio",
            reason: "length does not match temperatures".into(),
        });
    }
    let mut n_th = Vec::new();
    let mut r = Vec::new();
    let mut excluded = 0;
    for (&t, &q) in temperature.iter().zip(ratio) {
        positive("temperature", t)?;
        finite("ratio", q)?;
        if t < threshold {
            excluded += 1;
            continue;
        }
        n_th.push(thermal_occupation(t, omega_m)?);
        r.push(q);
    }
    if n_th.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} thermalized points; need at least 3",
            n_th.len()
        )));
    }
    let mut fit = fit_affine(&n_th, &r, None)?;
    let k = pm_depth * pm_depth * omega_mod * omega_mod / 4.0;
    let s = fit.value("slope");
    let (g0, grad) = if s > 0.0 {
        let g0 = (k * s).sqrt();
        (g0, [k / (2.0 * g0), 0.0])
    } else {
        (0.0, [0.0, 0.0])
    };
    fit.push_derived("g0", g0, Unit::RadPerSecond, &grad);
    if s == 0.0 {
        // sqrt is not differentiable at zero; bound from the slope error
        let i = fit.index("g0").expect("just added");
        fit.parameters[i].std_error = (k * fit.std_error("slope")).sqrt();
    }
    if s < 0.0 {
        fit.converged = false;
        fit.termination = Termination::Infeasible;
        fit.diagnostics
            .push(format!("area ratio decreases with occupation (slope {s:.4e})"));
    }
    if excluded > 0 {
        fit.warnings.push(format!(
            "points below {threshold} K excluded: {excluded}"
        ));
    }
    // g0 first
    let g = fit.parameters.pop().expect("g0");
    fit.parameters.insert(0, g);
    let n = fit.parameters.len();
    let order = [n - 1, 0, 1];
    let old = fit.covariance.clone();
    fit.covariance = order
        .iter()
        .flat_map(|&i| order.iter().map(|&j| old[i * n + j]).collect::<Vec<_>>())
        .collect();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::hz_to_angular;
    use std::f64::consts::TAU;

    fn om() -> f64 {
        hz_to_angular(1.486e6)
    }

    #[test]
    fn linear_areas_give_exact_constant() {
        let c = 2.5e-3; // area per quantum
        let temps = [0.08, 0.25, 0.4, 0.6, 0.8];
        let pts: Vec<ThermalPoint> = temps
            .iter()
            .map(|&t| ThermalPoint {
                temperature: t,
                area: c * thermal_occupation(t, om()).unwrap(),
                correction: 1.0,
            })
            .collect();
        let cal = thermal_calibration(&pts, om(), &ThermalOptions::default()).unwrap();
        assert!((cal.constant.quanta_per_area - 1.0 / c).abs() * c < 1e-12);
        assert!((cal.constant.bath_extrapolation - 0.08).abs() < 1e-9);
        assert_eq!(cal.excluded, vec![0.08]);
        assert_eq!(cal.constant.valid_above, 0.25);
    }

    #[test]
    fn correction_is_a_premultiplication() {
        let temps = [0.08, 0.25, 0.4, 0.6, 0.8];
        let corr = [1.15, 1.1, 1.05, 1.02, 1.0];
        let raw: Vec<f64> = temps
            .iter()
            .map(|&t| 3.0 * thermal_occupation(t, om()).unwrap() + 0.01 * t.sin())
            .collect();
        let with: Vec<ThermalPoint> = (0..5)
            .map(|i| ThermalPoint {
                temperature: temps[i],
                area: raw[i],
                correction: corr[i],
            })
            .collect();
        let pre: Vec<ThermalPoint> = (0..5)
            .map(|i| ThermalPoint {
                temperature: temps[i],
                area: raw[i] * corr[i],
                correction: 1.0,
            })
            .collect();
        let a = thermal_calibration(&with, om(), &ThermalOptions::default()).unwrap();
        let b = thermal_calibration(&pre, om(), &ThermalOptions::default()).unwrap();
        assert!((a.constant.quanta_per_area - b.constant.quanta_per_area).abs() < 1e-12 * a.constant.quanta_per_area);
    }

    #[test]
    fn too_few_thermalized_points() {
        let pts: Vec<ThermalPoint> = [0.05, 0.1, 0.3, 0.5]
            .iter()
            .map(|&t| ThermalPoint {
                temperature: t,
                area: t,
                correction: 1.0,
            })
            .collect();
        assert!(matches!(
            thermal_calibration(&pts, om(), &ThermalOptions::default()),
            Err(Error::InsufficientData(_))
        ));
        let all = ThermalOptions {
            include_below: true,
            ..Default::default()
        };
        assert!(thermal_calibration(&pts, om(), &all).is_ok());
    }

    #[test]
    fn g0_zero_ratio() {
        let t = [0.2, 0.4, 0.6, 0.8];
        let r = gorodetsky_g0(&t, &[0.0; 4], 0.1, hz_to_angular(1e3), om(), 0.2).unwrap();
        assert_eq!(r.value("g0"), 0.0);
        assert!(r.converged);
    }

    #[test]
    fn g0_round_trip_exact() {
        let g0 = TAU * 0.89;
        let (phi, wm) = (0.05, hz_to_angular(2e3));
        let k = phi * phi * wm * wm / 4.0;
        let t = [0.1, 0.2, 0.3, 0.5, 0.7];
        let r: Vec<f64> = t
            .iter()
            .map(|&x| g0 * g0 * thermal_occupation(x, om()).unwrap() / k)
            .collect();
        let rep = gorodetsky_g0(&t, &r, phi, wm, om(), 0.2).unwrap();
        assert_eq!(rep.parameters[0].name, "g0");
        assert!((rep.value("g0") - g0).abs() / g0 < 1e-10);
        assert!(rep.warnings[0].ends_with("excluded: 1"));
        assert_eq!(rep.covariance.len(), 9);
    }

    #[test]
    fn g0_negative_slope_not_converged() {
        let t = [0.2, 0.4, 0.6, 0.8];
        let r = gorodetsky_g0(&t, &[4.0, 3.0, 2.0, 1.0], 0.1, 1e4, om(), 0.2).unwrap();
        assert!(!r.converged);
        assert_eq!(r.termination, Termination::Infeasible);
    }

    #[test]
    fn matches_published_relation_at_large_occupation() {
        // published form g0² = φ²Ω²R/(2(2n̄ + 1)); ours replaces 2n̄ + 1 by 2n̄
        let (phi, w) = (0.02, hz_to_angular(1e3));
        for n in [1e3, 1e4] {
            let r = 7.0;
            let ours = phi * phi * w * w / 4.0 * r / n;
            let published = phi * phi * w * w * r / (2.0 * (2.0 * n + 1.0));
            assert!((ours - published).abs() / ours < 1.0 / n);
        }
    }
}

//! Lumped LC model of the flip-chip resonator: a gap-dependent membrane
//! capacitance C_m(d) in parallel with a parasitic C_p, across inductance L.

use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::estimate::{minimize, FitParameter, FitReport, LmOptions, Problem, Termination, Unit};
use crate::system::{MechanicalMode, EPSILON_0};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlateModel {
    /// The pad bridges two half-area electrodes in series: ε0·A/(4d).
    #[default]
    SeriesHalfPads,
    /// One plate of area A: ε0·A/d.
    SinglePlate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitModel {
    pub inductance: f64,
    pub parasitic_capacitance: f64,
    pub pad_area: f64,
    pub gap: f64,
    #[serde(default)]
    pub plate_model: PlateModel,
}

impl CircuitModel {
    pub fn new(
        inductance: f64,
        parasitic_capacitance: f64,
        pad_area: f64,
        gap: f64,
        plate_model: PlateModel,
    ) -> Result<Self> {
        let m = Self {
            inductance,
            parasitic_capacitance,
            pad_area,
            gap,
            plate_model,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        positive("inductance", self.inductance)?;
        positive("parasitic_capacitance", self.parasitic_capacitance)?;
        positive("pad_area", self.pad_area)?;
        positive("gap", self.gap)?;
        Ok(())
    }

    /// Membrane capacitance at the model's own gap.
    pub fn membrane_capacitance(&self) -> Result<f64> {
        membrane_capacitance(self.gap, self.pad_area, self.plate_model)
    }

    /// Loop frequency with the membrane removed (C_m → 0).
    pub fn bare_frequency(&self) -> f64 {
        1.0 / (self.inductance * self.parasitic_capacitance).sqrt()
    }

    pub fn participation(&self) -> Result<f64> {
        participation(self.membrane_capacitance()?, self.parasitic_capacitance)
    }
}

/// Inductance that puts the bare loop (C_p only) at angular frequency
/// `omega_bare`.
pub fn inductance_from_bare_frequency(omega_bare: f64, parasitic_capacitance: f64) -> Result<f64> {
    positive("omega_bare", omega_bare)?;
    positive("parasitic_capacitance", parasitic_capacitance)?;
    Ok(1.0 / (omega_bare * omega_bare * parasitic_capacitance))
}

pub fn membrane_capacitance(d: f64, area: f64, model: PlateModel) -> Result<f64> {
    positive("d", d)?;
    positive("area", area)?;
    Ok(match model {
        PlateModel::SeriesHalfPads => EPSILON_0 * area / (4.0 * d),
        PlateModel::SinglePlate => EPSILON_0 * area / d,
    })
}

/// ω_r = 1/√((C_m(d) + C_p)·L) at gap `d`; the model's own gap is ignored.
pub fn resonance_frequency(d: f64, model: &CircuitModel) -> Result<f64> {
    model.validate()?;
    let cm = membrane_capacitance(d, model.pad_area, model.plate_model)?;
    Ok(1.0 / ((cm + model.parasitic_capacitance) * model.inductance).sqrt())
}

/// Gap that tunes the loop to `omega_r`. Returns infinity when `omega_r` is
/// the bare-loop frequency and `NoSolution` above it.
pub fn gap_from_frequency(omega_r: f64, model: &CircuitModel) -> Result<f64> {
    positive("omega_r", omega_r)?;
    model.validate()?;
    let bare = model.bare_frequency();
    if omega_r > bare * (1.0 + 1e-12) {
        return Err(Error::NoSolution(format!(
            "{:.6e} Hz lies above the bare loop frequency {:.6e} Hz",
            omega_r / std::f64::consts::TAU,
            bare / std::f64::consts::TAU
        )));
    }
    let cm = 1.0 / (omega_r * omega_r * model.inductance) - model.parasitic_capacitance;
    // the bare frequency itself, up to rounding
    if cm <= 1e-9 * model.parasitic_capacitance {
        return Ok(f64::INFINITY);
    }
    let per_gap = match model.plate_model {
        PlateModel::SeriesHalfPads => EPSILON_0 * model.pad_area / 4.0,
        PlateModel::SinglePlate => EPSILON_0 * model.pad_area,
    };
    Ok(per_gap / cm)
}

/// Fraction of the total capacitance that moves with the membrane.
pub fn participation(c_m: f64, c_p: f64) -> Result<f64> {
    if !(c_m >= 0.0) || !c_m.is_finite() {
        return Err(Error::InvalidParameter {
            name: "c_m",
            reason: format!("must be non-negative, got {c_m}"),
        });
    }
    positive("c_p", c_p)?;
    Ok(c_m / (c_m + c_p))
}

/// Frequency pull per zero-point displacement: (ω_r/2)·p·x_zpf/d.
pub fn g0_from_geometry(omega_r: f64, participation: f64, d: f64, mode: &MechanicalMode) -> Result<f64> {
    positive("omega_r", omega_r)?;
    positive("d", d)?;
    if !(0.0..=1.0).contains(&participation) {
        return Err(Error::InvalidParameter {
            name: "participation",
            reason: format!("must lie in [0, 1], got {participation}"),
        });
    }
    Ok(0.5 * omega_r * participation * mode.x_zpf()? / d)
}

// Internal units: nH, fF, rad/s.
struct PullProblem<'a> {
    cm_ff: &'a [f64],
    omega: &'a [f64],
    sigma: &'a [f64],
}

fn pull_model(cm_ff: f64, l_nh: f64, cp_ff: f64) -> f64 {
    1.0 / (l_nh * 1e-9 * (cm_ff + cp_ff) * 1e-15).sqrt()
}

impl Problem for PullProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.omega.len()
    }

    fn data_scale(&self) -> f64 {
        self.omega
            .iter()
            .zip(self.sigma)
            .map(|(w, s)| (w / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    // p = [L (nH), C_p (fF)]
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.omega.len() {
            out[i] = (self.omega[i] - pull_model(self.cm_ff[i], p[0], p[1])) / self.sigma[i];
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut nalgebra::DMatrix<f64>) {
        for i in 0..self.omega.len() {
            let w = pull_model(self.cm_ff[i], p[0], p[1]);
            jac[(i, 0)] = w / (2.0 * p[0]) / self.sigma[i];
            jac[(i, 1)] = w / (2.0 * (self.cm_ff[i] + p[1])) / self.sigma[i];
        }
    }
}

/// Fits (C_p, L) to resonance frequencies measured at known gaps. Starts
/// from the exact line 1/ω² = L·C_m + L·C_p, then refines on ω itself.
pub fn fit_pull_curve(
    gaps: &[f64],
    omega_r: &[f64],
    pad_area: f64,
    plate_model: PlateModel,
    sigma: Option<&[f64]>,
) -> Result<FitReport> {
    if gaps.len() != omega_r.len() {
        return Err(Error::InvalidParameter {
            name: "omega_r",
            reason: "length does not match gaps".into(),
        });
    }
    if gaps.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} points cannot constrain C_p and L with any residual check; need at least 3",
            gaps.len()
        )));
    }
    let mut distinct: Vec<f64> = gaps.to_vec();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} distinct gap values; need at least 3",
            distinct.len()
        )));
    }
    for &w in omega_r {
        positive("omega_r", w)?;
    }
    let cm: Vec<f64> = gaps
        .iter()
        .map(|&d| membrane_capacitance(d, pad_area, plate_model).map(|c| c * 1e15))
        .collect::<Result<_>>()?;
    let sig: Vec<f64> = match sigma {
        Some(s) => {
            if s.len() != gaps.len() || s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidParameter {
                    name: "sigma",
                    reason: "need one positive uncertainty per point".into(),
                });
            }
            s.to_vec()
        }
        None => vec![1.0; gaps.len()],
    };
    let inv2: Vec<f64> = omega_r.iter().map(|w| 1e24 / (w * w)).collect();
    let lin = crate::estimate::fit_affine(&cm, &inv2, None)?;
    let (slope, icpt) = (lin.value("slope"), lin.value("intercept"));
    // 1/ω² in units of 1e-24 s²; L·C in nH·fF = 1e-24 s²
    let mut init = [slope, icpt / slope];
    if !(init[0] > 0.0) || !(init[1] > 0.0) {
        init = [slope.abs().max(1e-3), icpt.abs().max(1.0) / slope.abs().max(1e-3)];
    }
    let problem = PullProblem {
        cm_ff: &cm,
        omega: omega_r,
        sigma: &sig,
    };
    let out = minimize(&problem, &init, &LmOptions::default())?;
    let (l, cp) = (out.params[0] * 1e-9, out.params[1] * 1e-15);
    let scale = [1e-9, 1e-15];
    let cov: Vec<f64> = match &out.covariance {
        Some(c) => (0..2)
            .flat_map(|i| (0..2).map(move |j| c[(i, j)] * scale[i] * scale[j]))
            .collect(),
        None => vec![f64::NAN; 4],
    };
    let rms = (omega_r
        .iter()
        .zip(&cm)
        .map(|(&w, &c)| (w - pull_model(c, out.params[0], out.params[1])).powi(2))
        .sum::<f64>()
        / omega_r.len() as f64)
        .sqrt();
    let mut report = FitReport {
        parameters: vec![
            FitParameter {
                name: "c_p".into(),
                value: cp,
                std_error: cov[3].sqrt(),
                unit: Unit::Farad,
            },
            FitParameter {
                name: "inductance".into(),
                value: l,
                std_error: cov[0].sqrt(),
                unit: Unit::Henry,
            },
        ],
        covariance: vec![cov[3], cov[2], cov[1], cov[0]],
        residual_rms: rms,
        n_points: omega_r.len(),
        converged: out.converged,
        iterations: out.iterations,
        termination: out.termination,
        gradient_norm: out.gradient_norm,
        diagnostics: out.diagnostics,
        warnings: Vec::new(),
    };
    if !(l > 0.0 && cp > 0.0) {
        report.converged = false;
        report.termination = Termination::Infeasible;
        report
            .diagnostics
            .push(format!("fitted L = {l:.4e} H, C_p = {cp:.4e} F; both must be positive"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::hz_to_angular;
    use std::f64::consts::TAU;

    const AREA: f64 = 60e-6 * 60e-6;

    fn device_model() -> CircuitModel {
        let l = inductance_from_bare_frequency(hz_to_angular(9.8e9), 75e-15).unwrap();
        CircuitModel::new(l, 75e-15, AREA, 450e-9, PlateModel::SeriesHalfPads).unwrap()
    }

    #[test]
    fn plate_capacitances() {
        let s = membrane_capacitance(450e-9, AREA, PlateModel::SeriesHalfPads).unwrap();
        assert!((s - 17.7e-15).abs() < 0.05e-15, "{s}");
        let p = membrane_capacitance(450e-9, AREA, PlateModel::SinglePlate).unwrap();
        assert!((p - 70.8e-15).abs() < 0.05e-15, "{p}");
        let half = membrane_capacitance(900e-9, AREA, PlateModel::SeriesHalfPads).unwrap();
        assert!((half - s / 2.0).abs() < 1e-30);
        assert!(membrane_capacitance(0.0, AREA, PlateModel::SinglePlate).is_err());
    }

    #[test]
    fn loop_frequencies() {
        let m = device_model();
        assert!((m.inductance - 3.517e-9).abs() < 0.001e-9);
        assert!((m.bare_frequency() / TAU - 9.8e9).abs() < 1.0);
        // d chosen so that C_m = 25 fF
        let d = EPSILON_0 * AREA / (4.0 * 25e-15);
        let f = resonance_frequency(d, &m).unwrap() / TAU;
        assert!((f - 8.487e9).abs() < 1e6, "{f}");
        let mut prev = 0.0;
        for k in 1..50 {
            let w = resonance_frequency(k as f64 * 50e-9, &m).unwrap();
            assert!(w > prev);
            prev = w;
        }
    }

    #[test]
    fn gap_inversion() {
        let m = device_model();
        let d = gap_from_frequency(hz_to_angular(8.349e9), &m).unwrap();
        assert!((d - 282e-9).abs() < 2e-9, "{d}");
        let single = CircuitModel {
            plate_model: PlateModel::SinglePlate,
            ..m
        };
        let d1 = gap_from_frequency(hz_to_angular(8.349e9), &single).unwrap();
        assert!((d1 - 1126e-9).abs() < 2e-9, "{d1}");
        assert_eq!(gap_from_frequency(m.bare_frequency(), &m).unwrap(), f64::INFINITY);
        assert!(matches!(
            gap_from_frequency(1.01 * m.bare_frequency(), &m),
            Err(Error::NoSolution(_))
        ));
        for d in [50e-9, 282e-9, 3e-6] {
            let back = gap_from_frequency(resonance_frequency(d, &m).unwrap(), &m).unwrap();
            assert!((back - d).abs() / d < 1e-10);
        }
    }

    #[test]
    fn participation_example() {
        assert!((participation(25e-15, 75e-15).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn geometric_g0() {
        let mode = MechanicalMode::from_hz(1.486e6, 1e-3, Some(15e-12)).unwrap();
        let w = hz_to_angular(8.349e9);
        let g0 = g0_from_geometry(w, 0.25, 450e-9, &mode).unwrap() / TAU;
        assert!((g0 - 1.423).abs() < 1e-3, "{g0}");
        assert_eq!(g0_from_geometry(w, 0.0, 450e-9, &mode).unwrap(), 0.0);
        let heavy = MechanicalMode::from_hz(1.486e6, 1e-3, Some(60e-12)).unwrap();
        let g4 = g0_from_geometry(w, 0.25, 450e-9, &heavy).unwrap() / TAU;
        assert!((g4 - g0 / 2.0).abs() < 1e-12);
        let massless = MechanicalMode::from_hz(1.486e6, 1e-3, None).unwrap();
        assert_eq!(
            g0_from_geometry(w, 0.25, 450e-9, &massless),
            Err(Error::MissingMass)
        );
    }

    #[test]
    fn pull_curve_round_trip() {
        let m = device_model();
        let gaps: Vec<f64> = (0..8).map(|k| 200e-9 + k as f64 * 100e-9).collect();
        let w: Vec<f64> = gaps.iter().map(|&d| resonance_frequency(d, &m).unwrap()).collect();
        let r = fit_pull_curve(&gaps, &w, AREA, PlateModel::SeriesHalfPads, None).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value("c_p") - 75e-15).abs() / 75e-15 < 1e-8);
        assert!((r.value("inductance") - m.inductance).abs() / m.inductance < 1e-8);
    }

    #[test]
    fn pull_curve_rejects_underdetermined() {
        let err = fit_pull_curve(&[1e-7, 2e-7], &[1e10, 2e10], AREA, PlateModel::SinglePlate, None)
            .unwrap_err();
        assert!(err.to_string().contains("need at least 3"));
        let err = fit_pull_curve(&[1e-7, 1e-7, 2e-7, 2e-7], &[1e10; 4], AREA, PlateModel::SinglePlate, None)
            .unwrap_err();
        assert!(err.to_string().contains("distinct"));
    }
}

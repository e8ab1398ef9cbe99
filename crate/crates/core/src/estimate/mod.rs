//! Least-squares engine and the calibration fits built on it.

mod calibration;
pub(crate) mod curves;
mod lm;
mod report;
mod s11;

pub use calibration::{
    gorodetsky_g0, thermal_calibration, CalibrationConstant, ThermalCalibration, ThermalOptions,
    ThermalPoint, DEFAULT_THERMALIZATION_THRESHOLD,
};
pub use curves::{
    fit_affine, fit_exponential_decay, fit_gamma_vs_power, fit_lorentzian, fit_lorentzian_xy,
    fit_tls_power_law, lorentzian_initial_guess, DECAY_SNR_THRESHOLD,
};
pub use lm::{minimize, nlls_fit, CurveModel, LmOptions, LmOutcome, Problem};
pub use report::{FitParameter, FitReport, Termination, Unit};
pub use s11::{fit_s11, s11_model, CouplingHint, ReflectionData, ReflectionTrace};

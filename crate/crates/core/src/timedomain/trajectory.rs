use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::trace::TimeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRates {
    /// Energy damping rate; the amplitude relaxes at half of it.
    pub gamma_eff: f64,
    /// Rotation of the envelope relative to the demodulation frequency.
    pub omega_offset: f64,
}

/// Stationary complex Ornstein–Uhlenbeck envelope with ⟨|a|²⟩ = `occupation`
/// and autocorrelation n·exp((iΩ − Γ/2)|τ|), sampled with the exact
/// one-step transition so there is no step-size bias.
pub fn simulate_thermal_trajectory(
    rates: &TrajectoryRates,
    occupation: f64,
    fs: f64,
    duration: f64,
    seed: u64,
) -> Result<TimeTrace> {
    positive("gamma_eff", rates.gamma_eff)?;
    finite("omega_offset", rates.omega_offset)?;
    non_negative("occupation", occupation)?;
    positive("fs", fs)?;
    positive("duration", duration)?;
    let min_fs = (10.0 * rates.gamma_eff / TAU).max(4.0 * rates.omega_offset.abs() / TAU);
    if fs <= min_fs {
        return Err(Error::InvalidParameter {
            name: "fs",
            reason: format!("{fs} Hz is too slow; need more than {min_fs:.4e} Hz"),
        });
    }
    let n = (duration * fs).round() as usize;
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} samples")));
    }
    let dt = 1.0 / fs;
    let step = Complex64::new(-rates.gamma_eff / 2.0, rates.omega_offset) * dt;
    let decay = step.exp();
    let innovation = (occupation * -(-rates.gamma_eff * dt).exp_m1()).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    };
    let mut a = occupation.sqrt() * draw();
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        v.push(a);
        a = a * decay + innovation * draw();
    }
    let mut trace = TimeTrace::complex(fs, 0.0, v)?;
    if duration * rates.gamma_eff < 10.0 {
        trace.metadata.warnings.push(format!(
            "duration covers only {:.2} damping times; statistics will be poor",
            duration * rates.gamma_eff
        ));
    }
    Ok(trace)
}

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{non_negative, positive, Error, Result};
use crate::trace::TimeTrace;

/// Excite, amplify, then let the mode ring down. Intrinsic damping
/// `gamma_red` acts in every stage; the excite stage adds a coherent drive
/// and the amplify stage adds anti-damping `gamma_blue`, so the amplitude
/// grows at (gamma_blue − gamma_red)/2 there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingdownProtocol {
    pub excite_duration: f64,
    pub amplify_duration: f64,
    pub decay_duration: f64,
    /// Amplitude growth per second from the coherent drive.
    pub excite_rate: f64,
    pub gamma_blue: f64,
    pub gamma_red: f64,
    #[serde(default)]
    pub initial_amplitude: f64,
}

impl RingdownProtocol {
    pub fn validate(&self) -> Result<()> {
        non_negative("excite_duration", self.excite_duration)?;
        non_negative("amplify_duration", self.amplify_duration)?;
        non_negative("decay_duration", self.decay_duration)?;
        non_negative("excite_rate", self.excite_rate)?;
        non_negative("gamma_blue", self.gamma_blue)?;
        positive("gamma_red", self.gamma_red)?;
        non_negative("initial_amplitude", self.initial_amplitude)?;
        Ok(())
    }

    pub fn decay_start(&self) -> f64 {
        self.excite_duration + self.amplify_duration
    }

    pub fn total_duration(&self) -> f64 {
        self.decay_start() + self.decay_duration
    }

    /// Amplitude at time `t` from the start of the protocol.
    pub fn amplitude(&self, t: f64) -> f64 {
        let l = self.gamma_red / 2.0;
        let excite = |t: f64| {
            let e = (-l * t).exp();
            self.initial_amplitude * e + self.excite_rate * (1.0 - e) / l
        };
        let t1 = self.excite_duration;
        if t <= t1 {
            return excite(t);
        }
        let a1 = excite(t1);
        let grow = (self.gamma_blue - self.gamma_red) / 2.0;
        let t2 = self.decay_start();
        if t <= t2 {
            return a1 * (grow * (t - t1)).exp();
        }
        let a2 = a1 * (grow * self.amplify_duration).exp();
        a2 * (-l * (t - t2)).exp()
    }
}

/// Samples the protocol at `fs` from t = 0 to its end. Samples are complex
/// with zero phase (rotating frame on resonance).
pub fn simulate_ringdown(protocol: &RingdownProtocol, fs: f64) -> Result<TimeTrace> {
    protocol.validate()?;
    positive("fs", fs)?;
    let fastest = protocol.gamma_red.max(protocol.gamma_blue) / TAU;
    if fs <= 10.0 * fastest {
        return Err(Error::InvalidParameter {
            name: "fs",
            reason: format!("{fs} Hz undersamples rates up to {fastest:.4e} Hz; need more than 10x"),
        });
    }
    let n = (protocol.total_duration() * fs).floor() as usize + 1;
    let v = (0..n)
        .map(|k| Complex64::new(protocol.amplitude(k as f64 / fs), 0.0))
        .collect();
    Ok(TimeTrace::complex(fs, 0.0, v)?.with_label("amplitude"))
}

/// The samples of a simulated ringdown that belong to the decay stage.
pub fn decay_phase(trace: &TimeTrace, protocol: &RingdownProtocol) -> TimeTrace {
    let start = ((protocol.decay_start() - trace.t0) * trace.sample_rate).ceil().max(0.0) as usize;
    trace.slice(start.min(trace.len())..trace.len())
}

/// Multiplies a complex trace by exp(i·2π(f0·t + drift·t²/2)), t from the
/// first sample.
pub fn apply_frequency_drift(trace: &TimeTrace, f0: f64, drift: f64) -> TimeTrace {
    let dt = trace.dt();
    let v = trace
        .as_complex()
        .into_iter()
        .enumerate()
        .map(|(k, z)| {
            let t = k as f64 * dt;
            z * Complex64::from_polar(1.0, TAU * (f0 * t + 0.5 * drift * t * t))
        })
        .collect();
    let mut out = TimeTrace::complex(trace.sample_rate, trace.t0, v).expect("finite input");
    out.metadata = trace.metadata.clone();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::fit_exponential_decay;

    fn device_protocol() -> RingdownProtocol {
        RingdownProtocol {
            excite_duration: 10.0,
            amplify_duration: 1.75,
            decay_duration: 600.0,
            excite_rate: 1.0,
            gamma_blue: TAU * 0.5,
            gamma_red: TAU * 1e-3,
            initial_amplitude: 0.0,
        }
    }

    #[test]
    fn pure_decay_without_drive() {
        let p = RingdownProtocol {
            excite_rate: 0.0,
            gamma_blue: 0.0,
            initial_amplitude: 2.0,
            ..device_protocol()
        };
        let tr = simulate_ringdown(&p, 1.0).unwrap();
        let l = p.gamma_red / 2.0;
        for (k, z) in tr.as_complex().iter().enumerate() {
            let expect = 2.0 * (-l * k as f64).exp();
            assert!((z.re - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn energy_drop_over_decay_window() {
        let p = device_protocol();
        let e0 = p.amplitude(p.decay_start()).powi(2);
        let e1 = p.amplitude(p.total_duration()).powi(2);
        assert!((e1 / e0 - (-TAU * 1e-3 * 600.0f64).exp()).abs() < 1e-12);
        assert!((e1 / e0 - 0.0231).abs() < 1e-4);
    }

    #[test]
    fn decay_fit_recovers_gamma_red() {
        let p = device_protocol();
        let tr = simulate_ringdown(&p, 10.0).unwrap();
        let d = decay_phase(&tr, &p);
        assert!(d.t0 >= p.decay_start());
        let r = fit_exponential_decay(&d.energy()).unwrap();
        assert!((r.value("gamma") - p.gamma_red).abs() / p.gamma_red < 1e-3);
    }

    #[test]
    fn stages_are_continuous_and_grow_when_amplified() {
        let p = device_protocol();
        let t1 = p.excite_duration;
        assert!((p.amplitude(t1) - p.amplitude(t1 + 1e-9)).abs() < 1e-6);
        assert!(p.amplitude(p.decay_start()) > 10.0 * p.amplitude(t1));
    }

    #[test]
    fn rejects_undersampling() {
        assert!(simulate_ringdown(&device_protocol(), 0.5).is_err());
        let bad = RingdownProtocol {
            gamma_red: 0.0,
            ..device_protocol()
        };
        assert!(simulate_ringdown(&bad, 10.0).is_err());
    }

    #[test]
    fn drift_only_changes_phase() {
        let tr = simulate_ringdown(&device_protocol(), 10.0).unwrap();
        let d = apply_frequency_drift(&tr, 0.1, 1e-4);
        for (a, b) in tr.as_complex().iter().zip(d.as_complex()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12 * a.norm().max(1.0));
        }
    }
}

use std::f64::consts::{PI, TAU};

use crate::error::{positive, Error, Result};
use crate::estimate::curves::noise_sigma;
use crate::trace::{Samples, TimeTrace};

/// dφ/dt/2π of a complex trace in Hz, boxcar-averaged over
/// `smoothing_window` seconds. Output samples sit at the centre of each
/// averaging window.
pub fn instantaneous_frequency(trace: &TimeTrace, smoothing_window: f64) -> Result<TimeTrace> {
    positive("smoothing_window", smoothing_window)?;
    let Samples::Complex(z) = &trace.samples else {
        return Err(Error::InvalidParameter {
            name: "trace",
            reason: "instantaneous frequency needs a complex (I, Q) trace".into(),
        });
    };
    let fs = trace.sample_rate;
    let w = (smoothing_window * fs).round() as usize;
    if w < 2 {
        return Err(Error::InvalidParameter {
            name: "smoothing_window",
            reason: format!("{smoothing_window} s spans fewer than 2 samples"),
        });
    }
    if z.len() < w + 1 {
        return Err(Error::InsufficientData(format!(
            "{} samples for a {w}-sample window",
            z.len()
        )));
    }
    // wrapped phase increments are the derivative of the unwrapped phase
    let f: Vec<f64> = z
        .windows(2)
        .map(|p| {
            let mut d = p[1].arg() - p[0].arg();
            if d > PI {
                d -= TAU;
            } else if d <= -PI {
                d += TAU;
            }
            d * fs / TAU
        })
        .collect();
    let mut out = Vec::with_capacity(f.len() - w + 1);
    let mut s: f64 = f[..w].iter().sum();
    out.push(s / w as f64);
    for k in w..f.len() {
        s += f[k] - f[k - w];
        out.push(s / w as f64);
    }
    let t0 = trace.t0 + 0.5 / fs + 0.5 * (w - 1) as f64 / fs;
    let mut res = TimeTrace::real(fs, t0, out)?.with_label("freq_hz");
    let amps: Vec<f64> = z.iter().map(|v| v.norm()).collect();
    let sigma = noise_sigma(&amps);
    let mut sorted = amps.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    if !(median > 10.0 * sigma) {
        res.metadata.warnings.push(format!(
            "low SNR: median amplitude {median:.3e} against noise {sigma:.3e}"
        ));
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn chirp(f0: f64, rate: f64, fs: f64, n: usize) -> TimeTrace {
        let v = (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                Complex64::from_polar(1.0, TAU * (f0 * t + 0.5 * rate * t * t))
            })
            .collect();
        TimeTrace::complex(fs, 0.0, v).unwrap()
    }

    #[test]
    fn constant_tone() {
        let f = instantaneous_frequency(&chirp(0.37, 0.0, 10.0, 500), 1.0).unwrap();
        for v in f.as_real().unwrap() {
            assert!((v - 0.37).abs() < 1e-10);
        }
        assert!(f.metadata.warnings.is_empty());
    }

    #[test]
    fn chirp_gives_its_rate() {
        let (f0, r) = (-1.2, 0.01);
        let f = instantaneous_frequency(&chirp(f0, r, 10.0, 2000), 2.0).unwrap();
        for (t, v) in f.times().iter().zip(f.as_real().unwrap()) {
            assert!((v - (f0 + r * t)).abs() < 1e-9, "{t}: {v}");
        }
    }

    #[test]
    fn rejects_short_window() {
        assert!(instantaneous_frequency(&chirp(0.1, 0.0, 10.0, 100), 0.1).is_err());
        let real = TimeTrace::real(10.0, 0.0, vec![1.0; 100]).unwrap();
        assert!(instantaneous_frequency(&real, 1.0).is_err());
    }
}

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Acquisition, FrequencyAxis, PsdUnit, Samples, SpectrumTrace, TimeTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // periodic form, exact overlap-add at 50 %
            Window::Hann => (0..n)
                .map(|k| (PI * k as f64 / n as f64).sin().powi(2))
                .collect(),
        }
    }
}

/// Averaged modified periodogram.
///
/// Complex traces give a two-sided spectrum on [−fs/2, fs/2); real traces a
/// one-sided spectrum on [0, fs/2]. Either way Σ PSD·Δf equals the
/// window-weighted mean of |x|² over the segments, which is exactly the mean
/// square for a rectangular window without overlap.
pub fn welch_psd(
    trace: &TimeTrace,
    segment_length: usize,
    overlap: f64,
    window: Window,
) -> Result<SpectrumTrace> {
    if segment_length < 2 {
        return Err(Error::InvalidParameter {
            name: "segment_length",
            reason: "need at least 2 samples".into(),
        });
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter {
            name: "overlap",
            reason: format!("must lie in [0, 1), got {overlap}"),
        });
    }
    let n = trace.len();
    if segment_length > n {
        return Err(Error::InsufficientData(format!(
            "trace of {n} samples is shorter than one segment of {segment_length}"
        )));
    }
    let l = segment_length;
    let step = ((l as f64 * (1.0 - overlap)).round() as usize).max(1);
    let segments = (n - l) / step + 1;
    let w = window.coefficients(l);
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let fs = trace.sample_rate;
    let x = trace.as_complex();
    let fft = FftPlanner::new().plan_fft_forward(l);
    let mut acc = vec![0.0; l];
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for s in 0..segments {
        let start = s * step;
        for k in 0..l {
            buf[k] = x[start + k] * w[k];
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
    }
    let norm = 1.0 / (fs * w2 * segments as f64);
    let df = fs / l as f64;
    let (freqs, values, axis) = match trace.samples {
        Samples::Complex(_) => {
            // reorder to ascending frequency
            let half = l / 2;
            let order: Vec<usize> = (l - half..l).chain(0..l - half).collect();
            let freqs = order
                .iter()
                .map(|&k| if k >= l - half { (k as f64 - l as f64) * df } else { k as f64 * df })
                .collect();
            let values = order.iter().map(|&k| acc[k] * norm).collect();
            (freqs, values, FrequencyAxis::PumpRelative)
        }
        Samples::Real(_) => {
            let top = l / 2;
            let freqs = (0..=top).map(|k| k as f64 * df).collect();
            let values = (0..=top)
                .map(|k| {
                    let folded = k != 0 && !(l.is_multiple_of(2) && k == top);
                    acc[k] * norm * if folded { 2.0 } else { 1.0 }
                })
                .collect();
            (freqs, values, FrequencyAxis::Absolute)
        }
    };
    let mut out = SpectrumTrace::new(freqs, values, axis, PsdUnit::PerHz)?;
    let sw: f64 = w.iter().sum();
    out.metadata = Acquisition {
        resolution_bandwidth_hz: Some(fs * w2 / (sw * sw)),
        averages: Some(segments),
        source: Some("welch".into()),
        warnings: trace.metadata.warnings.clone(),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::TAU;

    #[test]
    fn tone_lands_in_one_bin() {
        let (fs, l, f1, amp) = (100.0, 200, 12.5, 1.7);
        let v: Vec<Complex64> = (0..2000)
            .map(|k| Complex64::from_polar(amp, TAU * f1 * k as f64 / fs))
            .collect();
        let tr = TimeTrace::complex(fs, 0.0, v).unwrap();
        let p = welch_psd(&tr, l, 0.0, Window::Rectangular).unwrap();
        let df = fs / l as f64;
        let (k, _) = p
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(p.frequencies()[k], f1);
        let total: f64 = p.values().iter().sum::<f64>() * df;
        assert!((total - amp * amp).abs() < 1e-10);
        assert!((p.values()[k] * df - amp * amp).abs() < 1e-10);
    }

    #[test]
    fn parseval_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nrm = Normal::new(0.0, 1.3).unwrap();
        let v: Vec<f64> = (0..4096).map(|_| nrm.sample(&mut rng)).collect();
        for l in [256, 255] {
            let n = 4096 / l * l;
            let trimmed = TimeTrace::real(50.0, 0.0, v[..n].to_vec()).unwrap();
            let ms_t = v[..n].iter().map(|x| x * x).sum::<f64>() / n as f64;
            let p = welch_psd(&trimmed, l, 0.0, Window::Rectangular).unwrap();
            let total: f64 = p.values().iter().sum::<f64>() * 50.0 / l as f64;
            assert!((total - ms_t).abs() < 1e-10 * ms_t, "l = {l}");
        }
        let cz: Vec<Complex64> = v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let msz = cz.iter().map(|z| z.norm_sqr()).sum::<f64>() / cz.len() as f64;
        let p = welch_psd(&TimeTrace::complex(50.0, 0.0, cz).unwrap(), 128, 0.0, Window::Rectangular)
            .unwrap();
        let total: f64 = p.values().iter().sum::<f64>() * 50.0 / 128.0;
        assert!((total - msz).abs() < 1e-10 * msz);
    }

    #[test]
    fn white_noise_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sigma = 0.5;
        let nrm = Normal::new(0.0, sigma / 2f64.sqrt()).unwrap();
        let fs = 20.0;
        let v: Vec<Complex64> = (0..128 * 100)
            .map(|_| Complex64::new(nrm.sample(&mut rng), nrm.sample(&mut rng)))
            .collect();
        let p = welch_psd(&TimeTrace::complex(fs, 0.0, v).unwrap(), 128, 0.0, Window::Hann).unwrap();
        assert_eq!(p.metadata.averages, Some(100));
        let mean = p.values().iter().sum::<f64>() / p.len() as f64;
        let expect = sigma * sigma / fs;
        // 100 averages per bin, 128 bins: mean error ~ 1 %
        assert!((mean - expect).abs() < 0.05 * expect, "{mean} vs {expect}");
        for v in p.values() {
            assert!((v - expect).abs() < 0.6 * expect);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let tr = TimeTrace::real(1.0, 0.0, vec![0.0; 10]).unwrap();
        assert!(welch_psd(&tr, 11, 0.0, Window::Hann).is_err());
        assert!(welch_psd(&tr, 4, 1.0, Window::Hann).is_err());
        assert!(welch_psd(&tr, 1, 0.0, Window::Hann).is_err());
    }
}

//! Output microwave power spectral density in units of noise quanta.
//!
//! Two closed forms are provided: the general sum of shot, mechanical and
//! cross terms (`spectrum_full`), and its resolved-sideband, near-cavity
//! limit (`spectrum_rwa`). Frequencies are pump-relative and given in Hz;
//! internally everything is evaluated at ω = 2πf.

use serde::{Deserialize, Serialize};

use crate::backaction::{backaction_rates, susceptibilities, BackactionResult, Susceptibilities};
use crate::error::{non_negative, positive, Error, Result};
use crate::system::hz_to_angular;
use crate::trace::{FrequencyAxis, PsdUnit, SpectrumTrace};

/// Microwave noise occupations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    /// Amplifier added noise.
    pub n_add: f64,
    /// Pump phase noise / cavity frequency noise seen through the coupling port.
    pub n_c: f64,
    /// Thermal occupation of the internal microwave bath.
    pub n_0: f64,
}

impl NoiseBudget {
    pub fn new(n_add: f64, n_c: f64, n_0: f64) -> Result<Self> {
        non_negative("n_add", n_add)?;
        non_negative("n_c", n_c)?;
        non_negative("n_0", n_0)?;
        Ok(Self { n_add, n_c, n_0 })
    }

    /// ñ = η n_c + (1 − η) n_0.
    pub fn n_tilde(&self, eta: f64) -> f64 {
        eta * self.n_c + (1.0 - eta) * self.n_0
    }
}

/// S_bg(P) = 𝒜 + αP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundModel {
    pub a_const: f64,
    /// quanta per W.
    pub alpha: f64,
}

impl BackgroundModel {
    pub fn new(a_const: f64, alpha: f64) -> Result<Self> {
        non_negative("a_const", a_const)?;
        Ok(Self { a_const, alpha })
    }
}

pub fn background_model_eval(power: f64, model: &BackgroundModel) -> Result<f64> {
    non_negative("power", power)?;
    Ok(model.a_const + model.alpha * power)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityNoiseEstimate {
    pub n_tilde: f64,
    /// Background fell below 𝒜; `n_tilde` was clamped to zero.
    pub underflow: bool,
}

/// ñ = (S_bg − 𝒜)/(4η).
pub fn cavity_noise_from_background(s_bg: f64, a_const: f64, eta: f64) -> Result<CavityNoiseEstimate> {
    positive("eta", eta)?;
    if s_bg < a_const {
        return Ok(CavityNoiseEstimate {
            n_tilde: 0.0,
            underflow: true,
        });
    }
    Ok(CavityNoiseEstimate {
        n_tilde: (s_bg - a_const) / (4.0 * eta),
        underflow: false,
    })
}

/// Occupations entering the spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumNoise {
    pub n_th: f64,
    pub n_tilde: f64,
    pub n_add: f64,
}

/// Rates for the resolved-sideband form, all rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwaRates {
    pub gamma_m: f64,
    pub gamma_e: f64,
    /// Ω_eff relative to the pump.
    pub omega_eff: f64,
    pub eta: f64,
    /// When given, enables the κ ≪ Ω_m validity check.
    pub kappa: Option<f64>,
}

/// n̄_th + ½ − (2 + Γ_e/Γ_m)(ñ + ½). The mechanical feature is a dip
/// exactly when this is negative.
pub fn squashing_bracket(n_th: f64, n_tilde: f64, gamma_e_over_gamma_m: f64) -> f64 {
    n_th + 0.5 - (2.0 + gamma_e_over_gamma_m) * (n_tilde + 0.5)
}

/// Flat part n_add + 4η(ñ + ½) of the resolved-sideband spectrum.
pub fn rwa_background(eta: f64, noise: &SpectrumNoise) -> f64 {
    noise.n_add + 4.0 * eta * (noise.n_tilde + 0.5)
}

/// Resolved-sideband PSD at pump-relative angular frequency `omega`.
pub fn rwa_psd_at(omega: f64, rates: &RwaRates, noise: &SpectrumNoise) -> f64 {
    let RwaRates {
        gamma_m,
        gamma_e,
        omega_eff,
        eta,
        ..
    } = *rates;
    let gamma_eff = gamma_m + gamma_e;
    let bracket = squashing_bracket(noise.n_th, noise.n_tilde, gamma_e / gamma_m);
    let x = omega - omega_eff;
    rwa_background(eta, noise)
        + eta * gamma_m * gamma_e * bracket / (gamma_eff * gamma_eff / 4.0 + x * x)
}

fn check_noise(noise: &SpectrumNoise) -> Result<()> {
    non_negative("n_th", noise.n_th)?;
    non_negative("n_tilde", noise.n_tilde)?;
    non_negative("n_add", noise.n_add)?;
    Ok(())
}

pub fn spectrum_rwa(freqs_hz: &[f64], rates: &RwaRates, noise: &SpectrumNoise) -> Result<SpectrumTrace> {
    positive("gamma_m", rates.gamma_m)?;
    non_negative("gamma_e", rates.gamma_e)?;
    non_negative("eta", rates.eta)?;
    check_noise(noise)?;
    let values = freqs_hz
        .iter()
        .map(|&f| rwa_psd_at(hz_to_angular(f), rates, noise))
        .collect();
    let mut trace = SpectrumTrace::new(
        freqs_hz.to_vec(),
        values,
        FrequencyAxis::PumpRelative,
        PsdUnit::Quanta,
    )?;
    if let Some(kappa) = rates.kappa {
        if kappa > 0.1 * rates.omega_eff.abs() {
            trace.metadata.warnings.push(format!(
                "not sideband resolved: kappa/Omega = {:.3}",
                kappa / rates.omega_eff.abs()
            ));
        }
        let max_offset = freqs_hz
            .iter()
            .map(|f| (hz_to_angular(*f) - rates.omega_eff).abs())
            .fold(0.0, f64::max);
        if max_offset > 0.1 * kappa {
            trace.metadata.warnings.push(format!(
                "grid extends {:.3} kappa from the mechanical sideband; cavity lineshape is not flat there",
                max_offset / kappa
            ));
        }
    }
    Ok(trace)
}

/// Parameters of the general spectrum, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullParams {
    pub kappa: f64,
    pub kappa_ex: f64,
    /// Δ = ω_p − ω_c.
    pub delta: f64,
    pub omega_m: f64,
    /// Linearized coupling g = g0 √n.
    pub g: f64,
    pub gamma_m: f64,
}

impl FullParams {
    pub fn eta(&self) -> f64 {
        self.kappa_ex / self.kappa
    }
}

/// The three additive pieces of the general spectrum at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumComponents {
    pub shot: f64,
    pub mech: f64,
    pub cross: f64,
}

impl SpectrumComponents {
    pub fn total(&self, n_add: f64) -> f64 {
        n_add + self.shot + self.mech + self.cross
    }
}

/// Precomputed susceptibilities and backaction for repeated evaluation.
#[derive(Debug, Clone, Copy)]
pub struct FullModel {
    pub params: FullParams,
    pub chi: Susceptibilities,
    pub backaction: BackactionResult,
}

impl FullModel {
    pub fn new(params: FullParams) -> Result<Self> {
        positive("kappa", params.kappa)?;
        positive("kappa_ex", params.kappa_ex)?;
        positive("gamma_m", params.gamma_m)?;
        if params.kappa_ex > params.kappa {
            return Err(Error::InvalidParameter {
                name: "kappa_ex",
                reason: format!("external rate {} exceeds total linewidth {}", params.kappa_ex, params.kappa),
            });
        }
        let chi = susceptibilities(params.delta, params.omega_m, params.kappa)?;
        let backaction = backaction_rates(
            params.g,
            params.delta,
            params.omega_m,
            params.kappa,
            params.gamma_m,
        )?;
        Ok(Self {
            params,
            chi,
            backaction,
        })
    }

    /// Components at pump-relative angular frequency `omega`.
    pub fn components(&self, omega: f64, noise: &SpectrumNoise) -> SpectrumComponents {
        let p = &self.params;
        let eta = p.eta();
        let half_k = p.kappa / 2.0;
        let lor = |x: f64, h: f64| 1.0 / (h * h + x * x);
        let ge = self.backaction.gamma_eff;
        let oe = self.backaction.omega_eff;
        let sum_a2 = self.chi.norm_sqr_sum();
        let g2 = p.g * p.g;
        let mech_pair = lor(omega - oe, ge / 2.0) + lor(omega + oe, ge / 2.0);
        let nt = noise.n_tilde + 0.5;

        let shot = eta * p.kappa * p.kappa * nt
            * (lor(omega - p.delta, half_k) + lor(omega + p.delta, half_k));
        let mech = g2 * p.kappa_ex * sum_a2 * mech_pair
            * (p.gamma_m * (noise.n_th + 0.5) + g2 * p.kappa * sum_a2 * nt);
        let cross_pref = (self.chi.a_minus - self.chi.a_plus.conj()).re;
        let cross = g2 * p.kappa * p.kappa * eta * ge * cross_pref * sum_a2 * nt * mech_pair;
        SpectrumComponents { shot, mech, cross }
    }
}

pub fn spectrum_full(freqs_hz: &[f64], params: &FullParams, noise: &SpectrumNoise) -> Result<SpectrumTrace> {
    check_noise(noise)?;
    let model = FullModel::new(*params)?;
    let values = freqs_hz
        .iter()
        .map(|&f| model.components(hz_to_angular(f), noise).total(noise.n_add))
        .collect();
    let mut trace = SpectrumTrace::new(
        freqs_hz.to_vec(),
        values,
        FrequencyAxis::PumpRelative,
        PsdUnit::Quanta,
    )?;
    if model.backaction.strong_coupling_warning {
        trace.metadata.warnings.push(format!(
            "weak-coupling assumption violated: Gamma_eff/kappa = {:.3}",
            model.backaction.gamma_eff / params.kappa
        ));
    }
    Ok(trace)
}

/// RWA rates consistent with a general parameter set.
pub fn rwa_rates_from_full(params: &FullParams) -> Result<RwaRates> {
    let b = backaction_rates(params.g, params.delta, params.omega_m, params.kappa, params.gamma_m)?;
    Ok(RwaRates {
        gamma_m: params.gamma_m,
        gamma_e: b.gamma_e,
        omega_eff: b.omega_eff,
        eta: params.eta(),
        kappa: Some(params.kappa),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::angular_to_hz;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    fn device_full(g_hz: f64, kappa_hz: f64) -> FullParams {
        let om = hz_to_angular(1.486e6);
        let kappa = hz_to_angular(kappa_hz);
        FullParams {
            kappa,
            kappa_ex: 0.81 * kappa,
            delta: -om,
            omega_m: om,
            g: hz_to_angular(g_hz),
            gamma_m: hz_to_angular(1e-3),
        }
    }

    fn grid(center_hz: f64, half_width_hz: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| center_hz - half_width_hz + 2.0 * half_width_hz * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn rwa_flat_without_backaction() {
        let rates = RwaRates {
            gamma_m: 1.0,
            gamma_e: 0.0,
            omega_eff: 10.0,
            eta: 0.7,
            kappa: None,
        };
        let noise = SpectrumNoise {
            n_th: 100.0,
            n_tilde: 0.3,
            n_add: 5.0,
        };
        let s = spectrum_rwa(&grid(1.5, 2.0, 101), &rates, &noise).unwrap();
        for v in s.values() {
            assert_eq!(*v, 5.0 + 4.0 * 0.7 * 0.8);
        }
    }

    #[test]
    fn rwa_on_peak_value() {
        let rates = RwaRates {
            gamma_m: hz_to_angular(1e-3),
            gamma_e: hz_to_angular(1.0),
            omega_eff: hz_to_angular(1.486e6),
            eta: 0.81,
            kappa: None,
        };
        let noise = SpectrumNoise {
            n_th: 1121.0,
            n_tilde: 0.0,
            n_add: 0.0,
        };
        let s = spectrum_rwa(&[1.486e6], &rates, &noise).unwrap();
        assert_relative_eq!(rwa_background(0.81, &noise), 1.62, max_relative = 1e-12);
        assert!((s.values()[0] - 3.63).abs() < 0.005, "{}", s.values()[0]);
        assert!((s.values()[0] - 1.62 - 2.01).abs() < 0.005);
    }

    #[test]
    fn dip_iff_bracket_negative() {
        let base = RwaRates {
            gamma_m: 1.0,
            gamma_e: 50.0,
            omega_eff: 0.0,
            eta: 0.8,
            kappa: None,
        };
        for n_tilde in [0.0, 5.0, 10.5, 11.0, 30.0] {
            let noise = SpectrumNoise {
                n_th: 600.0,
                n_tilde,
                n_add: 1.0,
            };
            let peak = rwa_psd_at(0.0, &base, &noise) - rwa_background(0.8, &noise);
            let b = squashing_bracket(600.0, n_tilde, 50.0);
            assert_eq!(peak < 0.0, b < 0.0, "n_tilde = {n_tilde}");
        }
    }

    #[test]
    fn full_without_coupling_is_shot_noise() {
        let p = device_full(0.0, 226e3);
        let noise = SpectrumNoise {
            n_th: 1121.0,
            n_tilde: 0.2,
            n_add: 3.0,
        };
        let m = FullModel::new(p).unwrap();
        for f in grid(1.486e6, 1e5, 21) {
            let c = m.components(hz_to_angular(f), &noise);
            assert_eq!(c.mech, 0.0);
            assert_eq!(c.cross, 0.0);
        }
        let s = spectrum_full(&[1.486e6], &p, &noise).unwrap();
        let c = m.components(hz_to_angular(1.486e6), &noise);
        assert_eq!(s.values()[0], 3.0 + c.shot);
    }

    fn max_rel_deviation(p: &FullParams, noise: &SpectrumNoise) -> f64 {
        let rates = rwa_rates_from_full(p).unwrap();
        let ge_hz = angular_to_hz(rates.gamma_m + rates.gamma_e);
        let freqs = grid(angular_to_hz(rates.omega_eff), 50.0 * ge_hz, 2001);
        let full = spectrum_full(&freqs, p, noise).unwrap();
        let rwa = spectrum_rwa(&freqs, &rates, noise).unwrap();
        full.values()
            .iter()
            .zip(rwa.values())
            .map(|(a, b)| (a - b).abs() / b.abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn full_matches_rwa_for_resolved_sidebands() {
        let noise = SpectrumNoise {
            n_th: 1121.0,
            n_tilde: 0.0,
            n_add: 0.0,
        };
        let p = device_full(240.0, 226e3);
        let dev = max_rel_deviation(&p, &noise);
        assert!(dev < 0.02, "deviation {dev}");
    }

    #[test]
    fn rwa_deviation_shrinks_with_sideband_resolution() {
        let noise = SpectrumNoise {
            n_th: 1121.0,
            n_tilde: 0.1,
            n_add: 1.0,
        };
        let om_hz = 1.486e6;
        let devs: Vec<f64> = [0.3, 0.15, 0.05]
            .iter()
            .map(|r| {
                let kappa_hz = r * om_hz;
                // hold Γ_e fixed while κ changes
                let g_hz = (1.0 * kappa_hz / 4.0f64).sqrt();
                max_rel_deviation(&device_full(g_hz, kappa_hz), &noise)
            })
            .collect();
        assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
    }

    #[test]
    fn full_spectrum_is_mirror_symmetric() {
        let p = device_full(240.0, 226e3);
        let noise = SpectrumNoise {
            n_th: 1121.0,
            n_tilde: 0.4,
            n_add: 2.0,
        };
        let m = FullModel::new(p).unwrap();
        let oe = m.backaction.omega_eff;
        for k in -20..=20 {
            let w = oe + k as f64 * m.backaction.gamma_eff;
            let a = m.components(w, &noise).total(2.0);
            let b = m.components(-w, &noise).total(2.0);
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    /// Composite Simpson over [a, b] with `n` (even) intervals.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn mechanical_sideband_area_against_quadrature() {
        // ñ = 0; at small Γ_e the backaction-noise term is negligible and the
        // area scales as (n̄_th + ½)
        let area = |g_hz: f64, n_th: f64| {
            let p = device_full(g_hz, 226e3);
            let m = FullModel::new(p).unwrap();
            let ge = m.backaction.gamma_eff;
            let oe = m.backaction.omega_eff;
            let s = m.chi.norm_sqr_sum();
            let g2 = p.g * p.g;
            let closed = g2 * p.kappa_ex * s * (std::f64::consts::PI / (ge / 2.0))
                * (p.gamma_m * (n_th + 0.5) + g2 * p.kappa * s * 0.5);
            let noise = SpectrumNoise {
                n_th,
                n_tilde: 0.0,
                n_add: 0.0,
            };
            let half = 5000.0 * ge;
            let quad = simpson(|w| m.components(w, &noise).mech, oe - half, oe + half, 400_000);
            (closed, quad)
        };
        for g_hz in [10.0, 0.5] {
            for n_th in [10.0, 1121.0] {
                let (c, q) = area(g_hz, n_th);
                assert!((c - q).abs() / c < 1e-3, "g {g_hz}, n_th {n_th}: {c} vs {q}");
            }
        }
        let ratio = area(0.5, 1121.0).1 / area(0.5, 10.0).1;
        let expect = 1121.5 / 10.5;
        assert!((ratio - expect).abs() / expect < 1e-3, "{ratio} vs {expect}");
    }

    #[test]
    fn background_model_examples() {
        let m = BackgroundModel::new(10.0, 3.0).unwrap();
        assert_eq!(background_model_eval(0.0, &m).unwrap(), 10.0);
        assert_eq!(
            cavity_noise_from_background(10.0, 10.0, 0.81).unwrap(),
            CavityNoiseEstimate {
                n_tilde: 0.0,
                underflow: false
            }
        );
        let est = cavity_noise_from_background(11.62, 10.0, 0.81).unwrap();
        assert_relative_eq!(est.n_tilde, 0.5, max_relative = 1e-12);
        let low = cavity_noise_from_background(9.0, 10.0, 0.81).unwrap();
        assert!(low.underflow);
        assert_eq!(low.n_tilde, 0.0);
    }

    #[test]
    fn noise_budget_mixes_ports() {
        let b = NoiseBudget::new(10.0, 0.5, 2.0).unwrap();
        assert_relative_eq!(b.n_tilde(0.81), 0.81 * 0.5 + 0.19 * 2.0);
        assert!(NoiseBudget::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rwa_warns_outside_validity() {
        let rates = RwaRates {
            gamma_m: 1.0,
            gamma_e: 1.0,
            omega_eff: TAU * 1e6,
            eta: 0.8,
            kappa: Some(TAU * 5e5),
        };
        let noise = SpectrumNoise {
            n_th: 1.0,
            n_tilde: 0.0,
            n_add: 0.0,
        };
        let s = spectrum_rwa(&[1e6], &rates, &noise).unwrap();
        assert!(!s.metadata.warnings.is_empty());
    }

    #[test]
    fn full_model_rejects_overcoupled_port() {
        let p = FullParams {
            kappa_ex: TAU * 300e3,
            ..device_full(240.0, 226e3)
        };
        assert!(FullModel::new(p).is_err());
    }

    proptest! {
        #[test]
        fn n_add_is_a_pure_offset(n_add in 0.0f64..100.0, n_tilde in 0.0f64..3.0, f in 1.48e6f64..1.49e6) {
            let p = device_full(240.0, 226e3);
            let base = SpectrumNoise { n_th: 1121.0, n_tilde, n_add: 0.0 };
            let shifted = SpectrumNoise { n_add, ..base };
            let a = spectrum_full(&[f], &p, &base).unwrap().values()[0];
            let b = spectrum_full(&[f], &p, &shifted).unwrap().values()[0];
            prop_assert!((b - a - n_add).abs() <= 1e-9 * b.abs().max(1.0));
            let r = rwa_rates_from_full(&p).unwrap();
            let a = spectrum_rwa(&[f], &r, &base).unwrap().values()[0];
            let b = spectrum_rwa(&[f], &r, &shifted).unwrap().values()[0];
            prop_assert!((b - a - n_add).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}

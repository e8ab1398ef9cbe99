use std::f64::consts::PI;

use super::lm::{check_xy, into_report, minimize, nlls_fit, CurveModel, CurveProblem, LmOptions};
use super::report::{FitParameter, FitReport, Termination, Unit};
use crate::error::{positive, Error, Result};
use crate::trace::{PsdUnit, SpectrumTrace, TimeTrace};

fn exact_report(
    params: Vec<FitParameter>,
    covariance: Vec<f64>,
    n_points: usize,
    residual_rms: f64,
) -> FitReport {
    FitReport {
        parameters: params,
        covariance,
        residual_rms,
        n_points,
        converged: true,
        iterations: 0,
        termination: Termination::Exact,
        gradient_norm: 0.0,
        diagnostics: Vec::new(),
        warnings: Vec::new(),
    }
}

/// Re-expresses a report in new parameters q = f(p) given ∂q/∂p (row per q).
fn transform(report: &FitReport, params: Vec<FitParameter>, jac: &[Vec<f64>]) -> FitReport {
    let n = report.parameters.len();
    let k = params.len();
    let mut cov = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += jac[a][i] * report.cov(i, j) * jac[b][j];
                }
            }
            cov[a * k + b] = s;
        }
    }
    let parameters = params
        .into_iter()
        .enumerate()
        .map(|(a, p)| FitParameter {
            std_error: cov[a * k + a].max(0.0).sqrt(),
            ..p
        })
        .collect();
    FitReport {
        parameters,
        covariance: cov,
        ..report.clone()
    }
}

fn param(name: &str, value: f64, unit: Unit) -> FitParameter {
    FitParameter {
        name: name.into(),
        value,
        std_error: 0.0,
        unit,
    }
}

/// Weighted linear regression y = slope·x + intercept in closed form.
///
/// Covariance is scaled by the reduced χ². With exactly two points there is
/// no residual variance: uncertainties then come from `sigma` alone, or are
/// zero with a warning when no `sigma` is given.
pub fn fit_affine(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<FitReport> {
    let s = check_xy(x, y, sigma)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} points for an affine fit")));
    }
    let w: Vec<f64> = s.iter().map(|v| 1.0 / (v * v)).collect();
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: "all abscissae are equal".into(),
        });
    }
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let resid: Vec<f64> = (0..n).map(|i| y[i] - slope * x[i] - intercept).collect();
    let chi2: f64 = (0..n).map(|i| w[i] * resid[i] * resid[i]).sum();
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    let mut warnings = Vec::new();
    let scale = if n > 2 {
        chi2 / (n - 2) as f64
    } else if sigma.is_some() {
        1.0
    } else {
        warnings.push("two points and no uncertainties: parameter errors unavailable".into());
        0.0
    };
    // covariance of (slope, intercept) for centred abscissae, then shifted
    let var_s = scale / sxx;
    let var_m = scale / sw;
    let cov_si = -xm * var_s;
    let var_i = var_m + xm * xm * var_s;
    let mut r = exact_report(
        vec![
            param("slope", slope, Unit::Dimensionless),
            param("intercept", intercept, Unit::Dimensionless),
        ],
        vec![var_s, cov_si, cov_si, var_i],
        n,
        rms,
    );
    r.parameters[0].std_error = var_s.sqrt();
    r.parameters[1].std_error = var_i.sqrt();
    r.warnings = warnings;
    Ok(r)
}

/// offset + area·(w/2π)/((x − c)² + (w/2)²), parameters [c, w, area, offset].
struct Lorentzian {
    x_unit: Unit,
    area_unit: Unit,
    y_unit: Unit,
}

impl CurveModel for Lorentzian {
    fn names(&self) -> Vec<(&'static str, Unit)> {
        vec![
            ("center", self.x_unit.clone()),
            ("fwhm", self.x_unit.clone()),
            ("area", self.area_unit.clone()),
            ("offset", self.y_unit.clone()),
        ]
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        let u = x - p[0];
        let d = u * u + 0.25 * p[1] * p[1];
        p[3] + p[2] * p[1] / (2.0 * PI * d)
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) -> Option<()> {
        let (c, w, a) = (p[0], p[1], p[2]);
        let u = x - c;
        let d = u * u + 0.25 * w * w;
        out[0] = a * w * 2.0 * u / (2.0 * PI * d * d);
        out[1] = a / (2.0 * PI * d) * (1.0 - w * w / (2.0 * d));
        out[2] = w / (2.0 * PI * d);
        out[3] = 1.0;
        Some(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Starting point for a Lorentzian: offset from the outer tenth of the
/// points, centre at the largest deviation, width from half-maximum
/// crossings.
pub fn lorentzian_initial_guess(x: &[f64], y: &[f64]) -> [f64; 4] {
    let n = x.len();
    let edge = (n / 10).max(1);
    let mut tails: Vec<f64> = y[..edge].iter().chain(&y[n - edge..]).copied().collect();
    let offset = median(&mut tails);
    let (k, h) = y
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v - offset))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap_or((0, 0.0));
    let half = 0.5 * h.abs();
    let dev = |i: usize| (y[i] - offset) * h.signum();
    let cross = |i: usize, j: usize| {
        // linear interpolation of the half-max crossing between i and j
        let (a, b) = (dev(i), dev(j));
        let t = if a != b { (a - half) / (a - b) } else { 0.5 };
        x[i] + t * (x[j] - x[i])
    };
    let mut lo = k;
    while lo > 0 && dev(lo) > half {
        lo -= 1;
    }
    let mut hi = k;
    while hi + 1 < n && dev(hi) > half {
        hi += 1;
    }
    let left = if lo < k { cross(lo + 1, lo) } else { x[k] };
    let right = if hi > k { cross(hi - 1, hi) } else { x[k] };
    let step = if n > 1 { (x[n - 1] - x[0]).abs() / (n - 1) as f64 } else { 1.0 };
    let fwhm = (right - left).abs().max(2.0 * step);
    let area = h * PI * fwhm / 2.0;
    [x[k], fwhm, area, offset]
}

/// Lorentzian fit to arbitrary (x, y) data. `sigma` defaults to uniform.
pub fn fit_lorentzian_xy(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<FitReport> {
    fit_lorentzian_units(x, y, sigma, Unit::Hertz, Unit::Dimensionless, Unit::Dimensionless)
}

fn fit_lorentzian_units(
    x: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
    x_unit: Unit,
    area_unit: Unit,
    y_unit: Unit,
) -> Result<FitReport> {
    let s = check_xy(x, y, sigma)?;
    if x.len() <= 4 {
        return Err(Error::InsufficientData(format!(
            "{} points for a Lorentzian",
            x.len()
        )));
    }
    let model = Lorentzian {
        x_unit,
        area_unit,
        y_unit,
    };
    let problem = CurveProblem {
        model: &model,
        x,
        y,
        sigma: &s,
    };
    let opts = LmOptions::default();
    let mut out = minimize(&problem, &lorentzian_initial_guess(x, y), &opts)?;
    if out.params[1] < 0.0 {
        // (w, A) → (−w, −A) leaves the model unchanged
        let mut p = out.params.clone();
        p[1] = -p[1];
        p[2] = -p[2];
        let iters = out.iterations;
        out = minimize(&problem, &p, &opts)?;
        out.iterations += iters;
    }
    let rms = (x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - model.eval(xi, &out.params)).powi(2))
        .sum::<f64>()
        / x.len() as f64)
        .sqrt();
    let mut report = into_report(out, &model.names(), x.len(), rms);
    let (c, w) = (report.value("center"), report.value("fwhm"));
    let across = x.iter().filter(|&&v| (v - c).abs() <= w / 2.0).count();
    if across < 8 {
        report.warnings.push(format!(
            "only {across} points within the fitted linewidth; need at least 8"
        ));
    }
    Ok(report)
}

/// Lorentzian fit to a spectrum trace; centre and width are in Hz.
pub fn fit_lorentzian(trace: &SpectrumTrace) -> Result<FitReport> {
    let (area_unit, y_unit) = match trace.unit {
        PsdUnit::Quanta => (Unit::Other("quanta·Hz".into()), Unit::Quanta),
        PsdUnit::WattsPerHz => (Unit::Watt, Unit::Other("W/Hz".into())),
        PsdUnit::PerHz => (Unit::Dimensionless, Unit::Other("1/Hz".into())),
    };
    let mut r = fit_lorentzian_units(
        trace.frequencies(),
        trace.values(),
        None,
        Unit::Hertz,
        area_unit,
        y_unit,
    )?;
    r.warnings.extend(trace.metadata.warnings.iter().cloned());
    Ok(r)
}

struct Decay;

impl CurveModel for Decay {
    fn names(&self) -> Vec<(&'static str, Unit)> {
        vec![("gamma", Unit::RadPerSecond), ("amplitude", Unit::Dimensionless)]
    }

    fn eval(&self, t: f64, p: &[f64]) -> f64 {
        p[1] * (-p[0] * t).exp()
    }

    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) -> Option<()> {
        let e = (-p[0] * t).exp();
        out[0] = -t * p[1] * e;
        out[1] = e;
        Some(())
    }
}

/// Samples of a decaying energy trace below `snr_threshold` noise standard
/// deviations are dropped from the first such sample on.
pub const DECAY_SNR_THRESHOLD: f64 = 3.0;

/// White-noise σ from the median absolute second difference.
pub(crate) fn noise_sigma(v: &[f64]) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    let mut d2: Vec<f64> = v.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).abs()).collect();
    // second differences of white noise have variance 6σ²
    median(&mut d2) / 0.674_489_750_196_081_7 / 6f64.sqrt()
}

/// Fits A·exp(−Γt) to an energy trace, t measured from the first sample.
///
/// The fit is affine in ln E with σ_ln = σ_E/E, where σ_E is estimated from
/// the trace. That estimate seeds a least-squares fit on E itself with
/// constant σ_E. The tail is cut at the first sample whose energy falls below
/// [`DECAY_SNR_THRESHOLD`]·σ_E. Γ is reported in s⁻¹ (an angular rate).
pub fn fit_exponential_decay(energy: &TimeTrace) -> Result<FitReport> {
    let e = energy.as_real().ok_or(Error::InvalidParameter {
        name: "energy",
        reason: "expected a real-valued energy trace".into(),
    })?;
    let sigma_e = noise_sigma(e);
    let cut = if sigma_e > 0.0 {
        e.iter()
            .position(|&v| v < DECAY_SNR_THRESHOLD * sigma_e)
            .unwrap_or(e.len())
    } else {
        e.len()
    };
    let kept = &e[..cut];
    if let Some(i) = kept.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "energy",
            reason: format!("sample {i} is not positive"),
        });
    }
    if kept.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} samples above the noise floor",
            kept.len()
        )));
    }
    let dt = energy.dt();
    let t: Vec<f64> = (0..kept.len()).map(|i| i as f64 * dt).collect();
    let ln: Vec<f64> = kept.iter().map(|v| v.ln()).collect();
    let sig: Option<Vec<f64>> = (sigma_e > 0.0).then(|| kept.iter().map(|v| sigma_e / v).collect());
    let lin = fit_affine(&t, &ln, sig.as_deref())?;
    let gamma = -lin.value("slope");
    let amp = lin.value("intercept").exp();
    let log_fit = |lin: &FitReport| {
        let mut r = transform(
            lin,
            vec![
                param("gamma", gamma, Unit::RadPerSecond),
                param("amplitude", amp, Unit::Dimensionless),
            ],
            &[vec![-1.0, 0.0], vec![0.0, amp]],
        );
        r.residual_rms = (kept
            .iter()
            .zip(&t)
            .map(|(v, ti)| (v - amp * (-gamma * ti).exp()).powi(2))
            .sum::<f64>()
            / kept.len() as f64)
            .sqrt();
        r
    };
    let mut r = if sigma_e > 0.0 {
        // the log-space weights use the noisy samples, which biases Γ once
        // σ_E/E is not small; refine on E itself with constant σ_E
        let s = vec![sigma_e; kept.len()];
        match nlls_fit(&Decay, &t, kept, Some(&s), &[gamma, amp]) {
            Ok(p) if p.converged => p,
            _ => {
                let mut r = log_fit(&lin);
                r.warnings.push("linear-scale refinement failed; log-space estimate kept".into());
                r
            }
        }
    } else {
        log_fit(&lin)
    };
    if cut < e.len() {
        r.warnings.push(format!(
            "tail truncated at sample {cut} of {}: energy below {DECAY_SNR_THRESHOLD}σ noise ({sigma_e:.3e})",
            e.len()
        ));
    }
    Ok(r)
}

/// Fits Γ_eff = Γ_m(1 + P/P₀). The model is affine in P, so this is the
/// closed-form regression re-expressed in (Γ_m, P₀).
pub fn fit_gamma_vs_power(power: &[f64], gamma_eff: &[f64], sigma: Option<&[f64]>) -> Result<FitReport> {
    if power.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} points; need at least 3",
            power.len()
        )));
    }
    for &p in power {
        if !(p >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "power",
                reason: format!("powers must be non-negative, got {p}"),
            });
        }
    }
    let pmax = power.iter().copied().fold(0.0, f64::max);
    let pmin = power.iter().copied().filter(|&p| p > 0.0).fold(f64::INFINITY, f64::min);
    let has_zero = power.contains(&0.0);
    if !has_zero && pmax < 10.0 * pmin {
        return Err(Error::InsufficientData(format!(
            "powers span {:.2} decades; need at least one",
            (pmax / pmin).log10()
        )));
    }
    let lin = fit_affine(power, gamma_eff, sigma)?;
    let (s, b) = (lin.value("slope"), lin.value("intercept"));
    let p0 = b / s;
    let mut r = transform(
        &lin,
        vec![
            param("gamma_m", b, Unit::RadPerSecond),
            param("p0", p0, Unit::Watt),
        ],
        &[vec![0.0, 1.0], vec![-b / (s * s), 1.0 / s]],
    );
    if !(b > 0.0) || !(s > 0.0) {
        r.converged = false;
        r.termination = Termination::Infeasible;
        r.diagnostics.push(format!(
            "fitted line has intercept {b:.4e} and slope {s:.4e}; Gamma_m and P0 must both be positive"
        ));
    }
    Ok(r)
}

/// Fits Γ(T) = Γ_ref·(T/T_ref)^α by regression in log-log space.
pub fn fit_tls_power_law(temperature: &[f64], gamma: &[f64], t_ref: f64) -> Result<FitReport> {
    positive("t_ref", t_ref)?;
    if temperature.len() != gamma.len() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: "length does not match temperatures".into(),
        });
    }
    for (&t, &g) in temperature.iter().zip(gamma) {
        positive("temperature", t)?;
        positive("gamma", g)?;
    }
    let lx: Vec<f64> = temperature.iter().map(|t| (t / t_ref).ln()).collect();
    let ly: Vec<f64> = gamma.iter().map(|g| g.ln()).collect();
    let lin = fit_affine(&lx, &ly, None)?;
    let g_ref = lin.value("intercept").exp();
    Ok(transform(
        &lin,
        vec![
            param("gamma_ref", g_ref, Unit::RadPerSecond),
            param("alpha", lin.value("slope"), Unit::Dimensionless),
        ],
        &[vec![0.0, g_ref], vec![1.0, 0.0]],
    ))
}

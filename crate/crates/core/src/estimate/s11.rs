//! Single-port reflection S11(ω) = G·[1 − κ_ex/(i(ω − ω_c) + κ/2)] with a
//! complex gain G as nuisance parameter.
//!
//! The fit runs in Hz relative to the middle of the sweep for conditioning;
//! the report carries angular ω_c, κ, κ_ex.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lm::{into_report, minimize, LmOptions, LmOutcome, Problem};
use super::report::{FitReport, Unit};
use crate::error::{Error, Result};
use crate::system::CavityParams;
use crate::table::{Table, TableError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionData {
    Complex(Vec<Complex64>),
    /// Linear |S11|.
    Magnitude(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionTrace {
    /// Absolute probe frequencies in Hz.
    pub frequencies: Vec<f64>,
    pub data: ReflectionData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplingHint {
    /// κ_ex > κ/2.
    Over,
    #[default]
    Under,
}

impl ReflectionTrace {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Columns `freq_hz` and either `re,im`, `mag` (linear) or `mag_db`.
    pub fn from_csv(text: &str) -> std::result::Result<Self, TableError> {
        let t = Table::parse(text)?;
        let frequencies = t.column("freq_hz")?.to_vec();
        let data = if t.has("re") && t.has("im") {
            let re = t.column("re")?;
            let im = t.column("im")?;
            ReflectionData::Complex(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
        } else if t.has("mag") {
            ReflectionData::Magnitude(t.column("mag")?.to_vec())
        } else if t.has("mag_db") {
            ReflectionData::Magnitude(
                t.column("mag_db")?
                    .iter()
                    .map(|db| 10f64.powf(db / 20.0))
                    .collect(),
            )
        } else {
            return Err(TableError::MissingColumn("re,im | mag | mag_db".into()));
        };
        if frequencies.len() < 2 {
            return Err(TableError::Invalid("need at least two frequency points".into()));
        }
        Ok(Self { frequencies, data })
    }

    pub fn to_csv(&self) -> String {
        match &self.data {
            ReflectionData::Complex(v) => {
                let re: Vec<f64> = v.iter().map(|z| z.re).collect();
                let im: Vec<f64> = v.iter().map(|z| z.im).collect();
                crate::table::write_csv(&["freq_hz", "re", "im"], &[&self.frequencies, &re, &im])
            }
            ReflectionData::Magnitude(v) => {
                crate::table::write_csv(&["freq_hz", "mag"], &[&self.frequencies, v])
            }
        }
    }
}

/// Ideal reflection at absolute frequency `f_hz` (unit gain).
pub fn s11_model(f_hz: f64, cavity: &CavityParams) -> Complex64 {
    let w = 2.0 * PI * f_hz;
    Complex64::new(1.0, 0.0)
        - cavity.kappa_ex / Complex64::new(cavity.kappa / 2.0, w - cavity.omega_c)
}

/// Unit-gain response in Hz variables: x = f − f_c, k = κ/2π, k_ex = κ_ex/2π.
fn response(x: f64, k: f64, kex: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) - kex / Complex64::new(k / 2.0, x)
}

struct ComplexProblem<'a> {
    x: &'a [f64],
    s: &'a [Complex64],
}

impl Problem for ComplexProblem<'_> {
    fn n_residuals(&self) -> usize {
        2 * self.x.len()
    }

    fn data_scale(&self) -> f64 {
        self.s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    // p = [f_c offset, k, k_ex, Re G, Im G]
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let g = Complex64::new(p[3], p[4]);
        for (i, (&x, &s)) in self.x.iter().zip(self.s).enumerate() {
            let d = s - g * response(x - p[0], p[1], p[2]);
            out[2 * i] = d.re;
            out[2 * i + 1] = d.im;
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) {
        let g = Complex64::new(p[3], p[4]);
        for (i, &x) in self.x.iter().enumerate() {
            let d = Complex64::new(p[1] / 2.0, x - p[0]);
            let d2 = d * d;
            let r = Complex64::new(1.0, 0.0) - p[2] / d;
            let cols = [
                -g * Complex64::new(0.0, -p[2]) / d2,
                -g * (0.5 * p[2]) / d2,
                g / d,
                -r,
                -Complex64::i() * r,
            ];
            for (j, c) in cols.iter().enumerate() {
                jac[(2 * i, j)] = c.re;
                jac[(2 * i + 1, j)] = c.im;
            }
        }
    }
}

struct MagnitudeProblem<'a> {
    x: &'a [f64],
    m: &'a [f64],
}

fn magnitude(x: f64, p: &[f64]) -> f64 {
    p[3].abs() * response(x - p[0], p[1], p[2]).norm()
}

impl Problem for MagnitudeProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.x.len()
    }

    fn data_scale(&self) -> f64 {
        self.m.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    // p = [f_c offset, k, k_ex, |G|]
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, (&x, &m)) in self.x.iter().zip(self.m).enumerate() {
            out[i] = m - magnitude(x, p);
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) {
        let ga = p[3].abs();
        for (i, &x) in self.x.iter().enumerate() {
            let d = Complex64::new(p[1] / 2.0, x - p[0]);
            let d2 = d * d;
            let r = Complex64::new(1.0, 0.0) - p[2] / d;
            let rn = r.norm().max(1e-300);
            let partial = [Complex64::new(0.0, -p[2]) / d2, (0.5 * p[2]) / d2, -1.0 / d];
            for (j, dr) in partial.iter().enumerate() {
                jac[(i, j)] = -ga * (r.conj() * dr).re / rn;
            }
            jac[(i, 3)] = -p[3].signum() * r.norm();
        }
    }
}

/// Algebraic circle fit: centre and radius.
fn fit_circle(s: &[Complex64]) -> Option<(Complex64, f64)> {
    // minimise Σ (x² + y² + D x + E y + F)²
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for z in s {
        let row = Vector3::new(z.re, z.im, 1.0);
        let rhs = -(z.norm_sqr());
        a += row * row.transpose();
        b += row * rhs;
    }
    let sol = a.lu().solve(&b)?;
    let c = Complex64::new(-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = c.norm_sqr() - sol[2];
    (r2 > 0.0).then(|| (c, r2.sqrt()))
}

/// Initial [f_c offset, k, k_ex, Re G, Im G] from the resonance circle.
pub(crate) fn complex_initial_guess(x: &[f64], s: &[Complex64]) -> [f64; 5] {
    let n = x.len();
    let span = (x[n - 1] - x[0]).abs().max(f64::MIN_POSITIVE);
    let Some((center, radius)) = fit_circle(s) else {
        let g = 0.5 * (s[0] + s[n - 1]);
        return [0.0, span / 10.0, span / 20.0, g.re, g.im];
    };
    let mid = 0.5 * (s[0] + s[n - 1]) - center;
    let dir = if mid.norm() > 1e-3 * radius { mid } else { s[0] - center };
    let gain = center + dir / dir.norm() * radius;
    let rel = gain - center;
    // x = h·cot(θ/2), θ the angle from the off-resonant point
    let (mut sc, mut sf, mut scc, mut scf, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&xi, &si) in x.iter().zip(s) {
        let th = ((si - center) / rel).arg();
        if th.abs() > PI / 3.0 {
            let c = 1.0 / (th / 2.0).tan();
            sc += c;
            sf += xi;
            scc += c * c;
            scf += c * xi;
            m += 1.0;
        }
    }
    let det = m * scc - sc * sc;
    let (fc, h) = if m >= 2.0 && det.abs() > 0.0 {
        let h = (m * scf - sc * sf) / det;
        ((sf - h * sc) / m, h.abs())
    } else {
        let k = s
            .iter()
            .enumerate()
            .max_by(|a, b| (a.1 - gain).norm().total_cmp(&(b.1 - gain).norm()))
            .map_or(0, |(i, _)| i);
        (x[k], span / 20.0)
    };
    let k = 2.0 * h.max(span * 1e-6);
    let eta = radius / gain.norm();
    [fc, k, eta * k, gain.re, gain.im]
}

fn magnitude_initial_guess(x: &[f64], m: &[f64], hint: CouplingHint) -> [f64; 4] {
    let n = x.len();
    let edge = (n / 10).max(1);
    let g = m[..edge]
        .iter()
        .chain(&m[n - edge..])
        .copied()
        .fold(0.0, f64::max);
    let (kmin, &smin) = m
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let d = (smin / g).min(1.0);
    // power dip reaches half depth at x = ±κ/2
    let level = 0.5 * (g * g + smin * smin);
    let below: Vec<f64> = x
        .iter()
        .zip(m)
        .filter(|(_, &v)| v * v <= level)
        .map(|(xi, _)| *xi)
        .collect();
    let span = (x[n - 1] - x[0]).abs();
    let k = match (below.first(), below.last()) {
        (Some(a), Some(b)) if b > a => b - a,
        _ => span / 20.0,
    };
    let eta = match hint {
        CouplingHint::Under => (1.0 - d) / 2.0,
        CouplingHint::Over => (1.0 + d) / 2.0,
    };
    [x[kmin], k, eta * k, g]
}

/// Fits a reflection trace. Magnitude-only traces need `hint` to pick
/// between the two coupling regimes with identical |S11|; without it they
/// are assumed undercoupled.
pub fn fit_s11(trace: &ReflectionTrace, hint: Option<CouplingHint>) -> Result<FitReport> {
    let n = trace.frequencies.len();
    let points = match &trace.data {
        ReflectionData::Complex(v) => v.len(),
        ReflectionData::Magnitude(v) => v.len(),
    };
    if points != n {
        return Err(Error::InvalidParameter {
            name: "trace",
            reason: format!("{n} frequencies but {points} values"),
        });
    }
    if trace.frequencies.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite("frequencies"));
    }
    if !trace.frequencies.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter {
            name: "frequencies",
            reason: "must be strictly increasing".into(),
        });
    }
    let f_ref = 0.5 * (trace.frequencies[0] + trace.frequencies[n - 1]);
    let x: Vec<f64> = trace.frequencies.iter().map(|f| f - f_ref).collect();
    let opts = LmOptions::default();
    let mut warnings = Vec::new();
    let (out, gain_names): (LmOutcome, Vec<(&str, Unit)>) = match &trace.data {
        ReflectionData::Complex(s) => {
            if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite("reflection"));
            }
            if n < 6 {
                return Err(Error::InsufficientData(format!("{n} points")));
            }
            let problem = ComplexProblem { x: &x, s };
            let mut out = minimize(&problem, &complex_initial_guess(&x, s), &opts)?;
            if out.params[1] < 0.0 {
                // negative linewidth: restart from the physical branch
                let mut p = out.params.clone();
                p[1] = p[1].abs();
                p[2] = p[2].abs();
                out = minimize(&problem, &p, &opts)?;
            }
            (out, vec![("gain_re", Unit::Dimensionless), ("gain_im", Unit::Dimensionless)])
        }
        ReflectionData::Magnitude(m) => {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("reflection"));
            }
            if n < 5 {
                return Err(Error::InsufficientData(format!("{n} points")));
            }
            let hint = hint.unwrap_or_default();
            warnings.push(format!(
                "magnitude-only trace: degraded precision, coupling regime taken as {hint:?}coupled"
            ));
            let problem = MagnitudeProblem { x: &x, m };
            let mut out = minimize(&problem, &magnitude_initial_guess(&x, m, hint), &opts)?;
            out.params[1] = out.params[1].abs();
            out.params[3] = out.params[3].abs();
            (out, vec![("gain_abs", Unit::Dimensionless)])
        }
    };
    let k = out.params[1];
    let span = x[n - 1] - x[0];
    if span < 3.0 * k {
        warnings.push(format!(
            "sweep spans {:.2} linewidths; at least 3 recommended",
            span / k
        ));
    }
    let rms = {
        let p = &out.params;
        let sq: f64 = match &trace.data {
            ReflectionData::Complex(s) => {
                let g = Complex64::new(p[3], p[4]);
                x.iter()
                    .zip(s)
                    .map(|(&xi, &si)| (si - g * response(xi - p[0], p[1], p[2])).norm_sqr())
                    .sum()
            }
            ReflectionData::Magnitude(m) => x
                .iter()
                .zip(m)
                .map(|(&xi, &mi)| (mi - magnitude(xi, p)).powi(2))
                .sum(),
        };
        (sq / n as f64).sqrt()
    };
    let mut names: Vec<(&str, Unit)> = vec![
        ("omega_c", Unit::RadPerSecond),
        ("kappa", Unit::RadPerSecond),
        ("kappa_ex", Unit::RadPerSecond),
    ];
    names.extend(gain_names);
    let mut report = into_report(out, &names, n, rms);
    // Hz offsets → absolute angular values
    let np = report.parameters.len();
    let scale: Vec<f64> = (0..np).map(|i| if i < 3 { 2.0 * PI } else { 1.0 }).collect();
    for i in 0..np {
        for j in 0..np {
            report.covariance[i * np + j] *= scale[i] * scale[j];
        }
        report.parameters[i].value *= scale[i];
        report.parameters[i].std_error *= scale[i];
    }
    report.parameters[0].value += 2.0 * PI * f_ref;
    let (kappa, kappa_ex) = (report.value("kappa"), report.value("kappa_ex"));
    let mut grad = vec![0.0; np];
    grad[1] = -kappa_ex / (kappa * kappa);
    grad[2] = 1.0 / kappa;
    report.push_derived("eta", kappa_ex / kappa, Unit::Dimensionless, &grad);
    report.warnings = warnings;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::hz_to_angular;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn table_cavity() -> CavityParams {
        CavityParams::from_hz(5.19e9, 226e3, 183e3).unwrap()
    }

    fn sweep(cav: &CavityParams, gain: Complex64, n: usize, half_span_hz: f64) -> ReflectionTrace {
        let fc = cav.omega_c / (2.0 * PI);
        let frequencies: Vec<f64> = (0..n)
            .map(|i| fc - half_span_hz + 2.0 * half_span_hz * i as f64 / (n - 1) as f64)
            .collect();
        let data = frequencies.iter().map(|&f| gain * s11_model(f, cav)).collect();
        ReflectionTrace {
            frequencies,
            data: ReflectionData::Complex(data),
        }
    }

    #[test]
    fn critical_coupling_nulls_reflection() {
        let cav = CavityParams::from_hz(5e9, 200e3, 100e3).unwrap();
        assert!(s11_model(5e9, &cav).norm() < 1e-15);
    }

    #[test]
    fn exact_trace_round_trip() {
        let cav = table_cavity();
        let tr = sweep(&cav, Complex64::from_polar(0.7, 1.1), 401, 700e3);
        let r = fit_s11(&tr, None).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value("omega_c") - cav.omega_c).abs() / cav.omega_c < 1e-12);
        assert!((r.value("kappa") - cav.kappa).abs() / cav.kappa < 1e-8);
        assert!((r.value("kappa_ex") - cav.kappa_ex).abs() / cav.kappa_ex < 1e-8);
        assert!((r.value("eta") - 183.0 / 226.0).abs() < 1e-8);
        assert!((r.value("eta") - 0.81).abs() < 0.005);
    }

    #[test]
    fn gain_rotation_invariance() {
        let cav = table_cavity();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let nrm = Normal::new(0.0, 0.01).unwrap();
        let base = sweep(&cav, Complex64::new(1.0, 0.0), 301, 600e3);
        let ReflectionData::Complex(s) = &base.data else { unreachable!() };
        let noisy: Vec<Complex64> = s
            .iter()
            .map(|z| z + Complex64::new(nrm.sample(&mut rng), nrm.sample(&mut rng)))
            .collect();
        let fit = |phi: f64| {
            let rot = Complex64::from_polar(1.0, phi);
            let tr = ReflectionTrace {
                frequencies: base.frequencies.clone(),
                data: ReflectionData::Complex(noisy.iter().map(|z| z * rot).collect()),
            };
            fit_s11(&tr, None).unwrap()
        };
        let a = fit(0.0);
        for phi in [0.7, 2.5, -2.0] {
            let b = fit(phi);
            for name in ["omega_c", "kappa", "kappa_ex", "eta"] {
                let (x, y) = (a.value(name), b.value(name));
                assert!((x - y).abs() <= 1e-7 * x.abs(), "{name}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn overcoupled_complex_is_unambiguous() {
        let cav = CavityParams::from_hz(5e9, 200e3, 170e3).unwrap();
        let tr = sweep(&cav, Complex64::new(0.3, -0.2), 301, 600e3);
        let r = fit_s11(&tr, None).unwrap();
        assert!((r.value("eta") - 0.85).abs() < 1e-8);
    }

    #[test]
    fn magnitude_only_uses_hint() {
        let cav = CavityParams::from_hz(5e9, 200e3, 150e3).unwrap();
        let c = sweep(&cav, Complex64::new(0.5, 0.0), 301, 600e3);
        let ReflectionData::Complex(s) = &c.data else { unreachable!() };
        let tr = ReflectionTrace {
            frequencies: c.frequencies.clone(),
            data: ReflectionData::Magnitude(s.iter().map(|z| z.norm()).collect()),
        };
        let over = fit_s11(&tr, Some(CouplingHint::Over)).unwrap();
        let under = fit_s11(&tr, Some(CouplingHint::Under)).unwrap();
        assert!((over.value("eta") - 0.75).abs() < 1e-6, "{}", over.value("eta"));
        assert!((under.value("eta") - 0.25).abs() < 1e-6, "{}", under.value("eta"));
        assert!((over.value("kappa") - hz_to_angular(200e3)).abs() / hz_to_angular(200e3) < 1e-6);
        assert!(over.warnings.iter().any(|w| w.contains("magnitude-only")));
    }

    #[test]
    fn narrow_sweep_warns() {
        let cav = table_cavity();
        let tr = sweep(&cav, Complex64::new(1.0, 0.0), 101, 200e3);
        let r = fit_s11(&tr, None).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("linewidths")));
    }

    #[test]
    fn csv_round_trip() {
        let tr = sweep(&table_cavity(), Complex64::new(1.0, 0.5), 11, 500e3);
        assert_eq!(ReflectionTrace::from_csv(&tr.to_csv()).unwrap(), tr);
        let db = "freq_hz,mag_db\n1,0\n2,-20\n";
        let t = ReflectionTrace::from_csv(db).unwrap();
        assert_eq!(t.data, ReflectionData::Magnitude(vec![1.0, 0.1]));
    }
}

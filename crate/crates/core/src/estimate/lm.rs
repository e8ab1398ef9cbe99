//! Levenberg–Marquardt on weighted residuals with Marquardt diagonal
//! scaling. Covariance is (JᵀJ)⁻¹ scaled by the reduced χ².

use nalgebra::{DMatrix, DVector};

use super::report::{FitParameter, FitReport, Termination, Unit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    /// Relative cost reduction below which the fit stops.
    pub ftol: f64,
    /// Largest column/residual cosine below which the fit stops.
    pub gtol: f64,
    pub xtol: f64,
    pub max_iterations: usize,
    pub initial_lambda: f64,
    /// A fit only counts as converged when the final scaled gradient is
    /// below this, whatever stopped the iteration.
    pub accept_gradient: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-10,
            gtol: 1e-12,
            xtol: 1e-14,
            max_iterations: 500,
            initial_lambda: 1e-3,
            accept_gradient: 1e-6,
        }
    }
}

/// Residuals are already divided by their standard deviations.
pub trait Problem {
    fn n_residuals(&self) -> usize;
    fn residuals(&self, p: &[f64], out: &mut [f64]);

    /// Norm of the weighted data. Residual norms below 1e-9 of this are
    /// treated as rounding noise when judging the gradient.
    fn data_scale(&self) -> f64 {
        0.0
    }

    /// Jacobian of the residuals, `n_residuals × p.len()`. The default uses
    /// central differences.
    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) {
        let m = self.n_residuals();
        let mut q = p.to_vec();
        let mut up = vec![0.0; m];
        let mut down = vec![0.0; m];
        for j in 0..p.len() {
            let h = if p[j] == 0.0 { 1e-8 } else { 1e-6 * p[j].abs() };
            q[j] = p[j] + h;
            self.residuals(&q, &mut up);
            q[j] = p[j] - h;
            self.residuals(&q, &mut down);
            q[j] = p[j];
            for i in 0..m {
                jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Reduced-χ²-scaled covariance; `None` when JᵀJ is singular.
    pub covariance: Option<DMatrix<f64>>,
    pub chi2: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub gradient_norm: f64,
    pub converged: bool,
    pub diagnostics: Vec<String>,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Largest |cos| between a Jacobian column and the residual vector.
fn scaled_gradient(jac: &DMatrix<f64>, r: &DVector<f64>, floor: f64) -> f64 {
    let rn = r.norm().max(floor);
    if rn == 0.0 {
        return 0.0;
    }
    let g = jac.transpose() * r;
    (0..jac.ncols())
        .map(|j| {
            let cn = jac.column(j).norm();
            if cn == 0.0 {
                0.0
            } else {
                g[j].abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// Column-scaled inverse of JᵀJ, or the indices of parameters that look
/// unidentifiable.
fn normal_inverse(jac: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, Vec<usize>> {
    let n = jac.ncols();
    let norms: Vec<f64> = (0..n).map(|j| jac.column(j).norm()).collect();
    let zero: Vec<usize> = (0..n).filter(|&j| norms[j] == 0.0 || !norms[j].is_finite()).collect();
    if !zero.is_empty() {
        return Err(zero);
    }
    let mut js = jac.clone();
    for j in 0..n {
        js.column_mut(j).scale_mut(1.0 / norms[j]);
    }
    let a = js.transpose() * &js;
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        // the right singular vector of the smallest value names the culprits
        let k = svd.singular_values.imin();
        let v_t = svd.v_t.as_ref().expect("requested");
        let row = v_t.row(k);
        let peak = row.iter().map(|x| x.abs()).fold(0.0, f64::max);
        return Err((0..n).filter(|&j| row[j].abs() > 0.3 * peak).collect());
    }
    let inv = match a.cholesky() {
        Some(c) => c.inverse(),
        None => return Err((0..n).collect()),
    };
    let mut out = inv;
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] /= norms[i] * norms[j];
        }
    }
    Ok(out)
}

pub fn minimize(problem: &impl Problem, initial: &[f64], opts: &LmOptions) -> Result<LmOutcome> {
    let n = initial.len();
    let m = problem.n_residuals();
    if m <= n {
        return Err(Error::InsufficientData(format!(
            "{m} residuals for {n} parameters"
        )));
    }
    if initial.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("initial parameters"));
    }
    let mut p = initial.to_vec();
    let mut r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("residuals at initial parameters"));
    }
    let mut cost = sum_sq(&r);
    let floor = 1e-9 * problem.data_scale();
    let mut jac = DMatrix::zeros(m, n);
    let mut lambda = opts.initial_lambda;
    let mut trial = vec![0.0; m];
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut gnorm;
    let mut last_drop = f64::INFINITY;

    loop {
        problem.jacobian(&p, &mut jac);
        let rv = DVector::from_column_slice(&r);
        gnorm = scaled_gradient(&jac, &rv, floor);
        if cost == 0.0 || gnorm <= opts.gtol {
            termination = Termination::Gradient;
            break;
        }
        // a tiny cost change alone can come from a heavily damped step
        if last_drop < opts.ftol && gnorm <= opts.accept_gradient {
            termination = Termination::CostChange;
            // one undamped Gauss-Newton step to remove what damping left
            let a = jac.transpose() * &jac;
            if let Some(chol) = a.cholesky() {
                let delta = chol.solve(&(-(jac.transpose() * &rv)));
                let cand: Vec<f64> = (0..n).map(|j| p[j] + delta[j]).collect();
                problem.residuals(&cand, &mut trial);
                let c = sum_sq(&trial);
                if c.is_finite() && c <= cost {
                    p = cand;
                    std::mem::swap(&mut r, &mut trial);
                    cost = c;
                    problem.jacobian(&p, &mut jac);
                    gnorm = scaled_gradient(&jac, &DVector::from_column_slice(&r), floor);
                }
            }
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        let diag: Vec<f64> = (0..n).map(|j| a[(j, j)]).collect();
        if diag.contains(&0.0) {
            termination = Termination::SingularJacobian;
            break;
        }
        let mut accepted = false;
        let mut rel_drop = 0.0;
        let mut step_norm = 0.0;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for j in 0..n {
                damped[(j, j)] += lambda * diag[j];
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let cand: Vec<f64> = (0..n).map(|j| p[j] + delta[j]).collect();
            problem.residuals(&cand, &mut trial);
            let c = sum_sq(&trial);
            if c.is_finite() && c < cost {
                rel_drop = (cost - c) / cost;
                step_norm = delta.norm();
                p = cand;
                std::mem::swap(&mut r, &mut trial);
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            termination = Termination::NoImprovement;
            break;
        }
        last_drop = rel_drop;
        let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if step_norm <= opts.xtol * (pn + opts.xtol) {
            termination = Termination::StepSize;
            problem.jacobian(&p, &mut jac);
            gnorm = scaled_gradient(&jac, &DVector::from_column_slice(&r), floor);
            break;
        }
    }

    let mut diagnostics = Vec::new();
    let dof = (m - n) as f64;
    let covariance = match normal_inverse(&jac) {
        Ok(inv) => Some(inv * (cost / dof)),
        Err(idx) => {
            termination = Termination::SingularJacobian;
            diagnostics.push(format!(
                "singular Jacobian: parameter indices {idx:?} are not identifiable from the data"
            ));
            None
        }
    };
    if termination == Termination::MaxIterations {
        diagnostics.push(format!(
            "iteration limit {} reached; scaled gradient {gnorm:.3e}",
            opts.max_iterations
        ));
    }
    let converged = termination.is_success() && gnorm <= opts.accept_gradient;
    if termination.is_success() && !converged {
        diagnostics.push(format!(
            "stopped ({termination:?}) with scaled gradient {gnorm:.3e} above {:.1e}",
            opts.accept_gradient
        ));
    }
    Ok(LmOutcome {
        params: p,
        converged,
        covariance,
        chi2: cost,
        iterations,
        termination,
        gradient_norm: gnorm,
        diagnostics,
    })
}

/// Packs an LM outcome into a report. `spec` gives name and unit per
/// parameter; `residual_rms` is in data units.
pub(crate) fn into_report(
    out: LmOutcome,
    spec: &[(&str, Unit)],
    n_points: usize,
    residual_rms: f64,
) -> FitReport {
    let n = spec.len();
    let cov: Vec<f64> = match &out.covariance {
        Some(c) => (0..n).flat_map(|i| (0..n).map(move |j| c[(i, j)])).collect(),
        None => vec![f64::NAN; n * n],
    };
    let parameters = spec
        .iter()
        .enumerate()
        .map(|(i, (name, unit))| FitParameter {
            name: name.to_string(),
            value: out.params[i],
            std_error: cov[i * n + i].sqrt(),
            unit: unit.clone(),
        })
        .collect();
    FitReport {
        parameters,
        covariance: cov,
        residual_rms,
        n_points,
        converged: out.converged,
        iterations: out.iterations,
        termination: out.termination,
        gradient_norm: out.gradient_norm,
        diagnostics: out.diagnostics,
        warnings: Vec::new(),
    }
}

/// A scalar model y = f(x; p) with optional analytic gradient.
pub trait CurveModel {
    fn names(&self) -> Vec<(&'static str, Unit)>;
    fn eval(&self, x: f64, p: &[f64]) -> f64;
    /// ∂f/∂p; `None` falls back to finite differences.
    fn gradient(&self, _x: f64, _p: &[f64], _out: &mut [f64]) -> Option<()> {
        None
    }
}

pub(crate) struct CurveProblem<'a, M: CurveModel> {
    pub model: &'a M,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub sigma: &'a [f64],
}

impl<M: CurveModel> Problem for CurveProblem<'_, M> {
    fn n_residuals(&self) -> usize {
        self.x.len()
    }

    fn data_scale(&self) -> f64 {
        self.y
            .iter()
            .zip(self.sigma)
            .map(|(y, s)| (y / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.x.len() {
            out[i] = (self.y[i] - self.model.eval(self.x[i], p)) / self.sigma[i];
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) {
        let mut grad = vec![0.0; p.len()];
        if self.model.gradient(self.x[0], p, &mut grad).is_none() {
            // default finite differences
            struct Fd<'b, 'a, M: CurveModel>(&'b CurveProblem<'a, M>);
            impl<M: CurveModel> Problem for Fd<'_, '_, M> {
                fn n_residuals(&self) -> usize {
                    self.0.n_residuals()
                }
                fn residuals(&self, p: &[f64], out: &mut [f64]) {
                    self.0.residuals(p, out)
                }
            }
            Fd(self).jacobian(p, jac);
            return;
        }
        for i in 0..self.x.len() {
            self.model.gradient(self.x[i], p, &mut grad);
            for j in 0..p.len() {
                jac[(i, j)] = -grad[j] / self.sigma[i];
            }
        }
    }
}

pub(crate) fn check_xy(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter {
            name: "y",
            reason: format!("length {} does not match x length {}", y.len(), x.len()),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("data"));
    }
    match sigma {
        None => Ok(vec![1.0; x.len()]),
        Some(s) => {
            if s.len() != x.len() {
                return Err(Error::InvalidParameter {
                    name: "sigma",
                    reason: "length does not match data".into(),
                });
            }
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter {
                    name: "sigma",
                    reason: "uncertainties must be positive and finite".into(),
                });
            }
            Ok(s.to_vec())
        }
    }
}

/// General weighted nonlinear least squares of `model` to (x, y).
pub fn nlls_fit(
    model: &impl CurveModel,
    x: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
    initial: &[f64],
) -> Result<FitReport> {
    let s = check_xy(x, y, sigma)?;
    let names = model.names();
    if names.len() != initial.len() {
        return Err(Error::InvalidParameter {
            name: "initial",
            reason: format!("expected {} values, got {}", names.len(), initial.len()),
        });
    }
    if x.len() <= initial.len() {
        return Err(Error::InsufficientData(format!(
            "{} points for {} parameters",
            x.len(),
            initial.len()
        )));
    }
    let problem = CurveProblem {
        model,
        x,
        y,
        sigma: &s,
    };
    let out = minimize(&problem, initial, &LmOptions::default())?;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - model.eval(xi, &out.params)).powi(2))
        .sum::<f64>()
        / x.len() as f64)
        .sqrt();
    Ok(into_report(out, &names, x.len(), rms))
}

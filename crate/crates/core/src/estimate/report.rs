use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "rad/s")]
    RadPerSecond,
    #[serde(rename = "Hz")]
    Hertz,
    #[serde(rename = "Hz/s")]
    HertzPerSecond,
    #[serde(rename = "W")]
    Watt,
    #[serde(rename = "F")]
    Farad,
    #[serde(rename = "H")]
    Henry,
    #[serde(rename = "m")]
    Meter,
    #[serde(rename = "s")]
    Second,
    #[serde(rename = "K")]
    Kelvin,
    #[serde(rename = "quanta")]
    Quanta,
    #[serde(rename = "1")]
    Dimensionless,
    #[serde(untagged)]
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// 1σ.
    pub std_error: f64,
    pub unit: Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Closed-form solution, no iterations.
    Exact,
    CostChange,
    Gradient,
    StepSize,
    /// No step reduces the cost any further.
    NoImprovement,
    MaxIterations,
    SingularJacobian,
    /// The optimum violates a physical constraint (e.g. negative rate).
    Infeasible,
}

impl Termination {
    pub fn is_success(self) -> bool {
        matches!(
            self,
            Termination::Exact
                | Termination::CostChange
                | Termination::Gradient
                | Termination::StepSize
                | Termination::NoImprovement
        )
    }
}

/// Outcome of a fit. `covariance` is row-major, `parameters.len()` square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub parameters: Vec<FitParameter>,
    pub covariance: Vec<f64>,
    pub residual_rms: f64,
    pub n_points: usize,
    pub converged: bool,
    pub iterations: usize,
    pub termination: Termination,
    /// Largest cosine between a Jacobian column and the residual vector.
    pub gradient_norm: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn get(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Value of `name`; panics if the fit has no such parameter.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("fit has no parameter `{name}`"))
            .value
    }

    pub fn std_error(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("fit has no parameter `{name}`"))
            .std_error
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance[i * self.parameters.len() + j]
    }

    /// Appends a parameter derived from existing ones. `gradient` holds
    /// ∂derived/∂p_i in parameter order; the covariance is extended by
    /// linear propagation.
    pub fn push_derived(&mut self, name: &str, value: f64, unit: Unit, gradient: &[f64]) {
        let n = self.parameters.len();
        assert_eq!(gradient.len(), n);
        let mut cross = vec![0.0; n];
        for (i, c) in cross.iter_mut().enumerate() {
            *c = (0..n).map(|j| self.cov(i, j) * gradient[j]).sum();
        }
        let var: f64 = (0..n).map(|i| gradient[i] * cross[i]).sum();
        let mut cov = Vec::with_capacity((n + 1) * (n + 1));
        for i in 0..n {
            cov.extend_from_slice(&self.covariance[i * n..(i + 1) * n]);
            cov.push(cross[i]);
        }
        cov.extend_from_slice(&cross);
        cov.push(var);
        self.covariance = cov;
        self.parameters.push(FitParameter {
            name: name.to_string(),
            value,
            std_error: var.max(0.0).sqrt(),
            unit,
        });
    }

    /// Copy with angular-frequency parameters expressed in Hz, for output.
    pub fn to_io_units(&self) -> FitReport {
        let n = self.parameters.len();
        let scale: Vec<f64> = self
            .parameters
            .iter()
            .map(|p| if p.unit == Unit::RadPerSecond { 1.0 / (2.0 * PI) } else { 1.0 })
            .collect();
        let mut out = self.clone();
        for (p, s) in out.parameters.iter_mut().zip(&scale) {
            if p.unit == Unit::RadPerSecond {
                p.unit = Unit::Hertz;
                p.value *= s;
                p.std_error *= s;
            }
        }
        for i in 0..n {
            for j in 0..n {
                out.covariance[i * n + j] *= scale[i] * scale[j];
            }
        }
        out
    }
}

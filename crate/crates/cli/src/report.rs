use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use emech::estimate::FitReport;

/// Why a command stopped. The exit code is part of the interface.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or malformed input, bad config: exit 1.
    Input(anyhow::Error),
    /// A fit or solver did not produce a usable answer: exit 2.
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(e) => write!(f, "input error: {e:#}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

/// Core errors split along the exit-code contract.
impl From<emech::Error> for Failure {
    fn from(e: emech::Error) -> Self {
        use emech::Error::*;
        match e {
            NoSolution(_) | Resonance | FitFailed(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

/// A quantity computed from fit results or configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub unit: String,
    /// Operation that produced it.
    pub operation: String,
    /// Names of the values it was computed from.
    pub inputs: Vec<String>,
}

impl Derived {
    pub fn new(name: &str, value: f64, unit: &str, operation: &str, inputs: &[&str]) -> Self {
        Self {
            name: name.into(),
            value,
            std_error: None,
            unit: unit.into(),
            operation: operation.into(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_error(mut self, s: f64) -> Self {
        self.std_error = Some(s);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    FitFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub status: Status,
    pub inputs: Vec<InputDigest>,
    /// sha256 over the config and every input, in order.
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub fits: Vec<NamedFit>,
    #[serde(default)]
    pub derived: Vec<Derived>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
    /// Collected inputs, only for `emech report`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<Parameter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub unit: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    /// Angular rates already converted to Hz.
    pub report: FitReport,
}

impl Report {
    pub fn new(command: &str, inputs: Vec<InputDigest>, config: Option<&InputDigest>) -> Self {
        let mut h = Sha256::new();
        for d in config.into_iter().chain(&inputs) {
            h.update(d.sha256.as_bytes());
        }
        let mut inputs = inputs;
        if let Some(c) = config {
            inputs.insert(0, c.clone());
        }
        Self {
            command: command.into(),
            status: Status::Ok,
            inputs,
            digest: hex::encode(h.finalize()),
            seed: None,
            fits: Vec::new(),
            derived: Vec::new(),
            warnings: Vec::new(),
            diagnostics: Vec::new(),
            parameters: Vec::new(),
        }
    }

    /// Records a fit in output units. A non-converged fit marks the report
    /// as failed and copies its diagnostics up.
    pub fn push_fit(&mut self, name: &str, fit: &FitReport) {
        if !fit.converged {
            self.status = Status::FitFailed;
            self.diagnostics.push(format!(
                "{name}: not converged ({:?} after {} iterations)",
                fit.termination, fit.iterations
            ));
            self.diagnostics
                .extend(fit.diagnostics.iter().map(|d| format!("{name}: {d}")));
        }
        self.warnings
            .extend(fit.warnings.iter().map(|w| format!("{name}: {w}")));
        self.fits.push(NamedFit {
            name: name.into(),
            report: fit.to_io_units(),
        });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

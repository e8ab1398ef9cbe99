use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value for `{0}`")]
    NonFinite(&'static str),

    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("mode mass is required for this operation")]
    MissingMass,

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("drive frequency sits on the isolator resonance; transmissibility is unbounded")]
    Resonance,

    #[error("fit failed: {0}")]
    FitFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(name))
    }
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<f64> {
    finite(name, v)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be strictly positive, got {v}"),
        })
    }
}

pub(crate) fn non_negative(name: &'static str, v: f64) -> Result<f64> {
    finite(name, v)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be non-negative, got {v}"),
        })
    }
}

//! Sampled frequency-domain and time-domain data carriers and their file
//! formats.
//!
//! * `SpectrumTrace` CSV: header `frequency_hz,psd_quanta` (or
//!   `frequency_hz,psd_w_per_hz`), one row per bin.
//! * `TimeTrace` CSV: header `time_s,i,q` for complex envelopes, or
//!   `time_s,<label>` for real traces.
//! * `TimeTrace` binary, little-endian:
//!
//!   | offset | type    | content                          |
//!   |--------|---------|----------------------------------|
//!   | 0      | [u8; 4] | magic `EMTT`                     |
//!   | 4      | u32     | format version (1)               |
//!   | 8      | u32     | kind: 0 = real, 1 = complex      |
//!   | 12     | u32     | reserved (0)                     |
//!   | 16     | f64     | sample rate, Hz                  |
//!   | 24     | f64     | t0, s                            |
//!   | 32     | u64     | number of samples                |
//!   | 40     | f64...  | samples; complex as (re, im)     |

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::table::{write_csv, Table, TableError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyAxis {
    Absolute,
    #[default]
    PumpRelative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PsdUnit {
    #[default]
    Quanta,
    WattsPerHz,
    /// Squared sample units per Hz, as produced by a periodogram.
    PerHz,
}

impl PsdUnit {
    fn column(self) -> &'static str {
        match self {
            PsdUnit::Quanta => "psd_quanta",
            PsdUnit::WattsPerHz => "psd_w_per_hz",
            PsdUnit::PerHz => "psd_per_hz",
        }
    }

    fn from_column(name: &str) -> Option<Self> {
        [PsdUnit::Quanta, PsdUnit::WattsPerHz, PsdUnit::PerHz]
            .into_iter()
            .find(|u| u.column() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Acquisition {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution_bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub averages: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpectrum")]
pub struct SpectrumTrace {
    frequencies: Vec<f64>,
    values: Vec<f64>,
    pub axis: FrequencyAxis,
    pub unit: PsdUnit,
    pub metadata: Acquisition,
}

#[derive(Deserialize)]
struct RawSpectrum {
    frequencies: Vec<f64>,
    values: Vec<f64>,
    #[serde(default)]
    axis: FrequencyAxis,
    #[serde(default)]
    unit: PsdUnit,
    #[serde(default)]
    metadata: Acquisition,
}

impl TryFrom<RawSpectrum> for SpectrumTrace {
    type Error = Error;
    fn try_from(r: RawSpectrum) -> Result<Self> {
        let mut t = SpectrumTrace::new(r.frequencies, r.values, r.axis, r.unit)?;
        t.metadata = r.metadata;
        Ok(t)
    }
}

impl SpectrumTrace {
    pub fn new(
        frequencies: Vec<f64>,
        values: Vec<f64>,
        axis: FrequencyAxis,
        unit: PsdUnit,
    ) -> Result<Self> {
        if frequencies.len() != values.len() {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!(
                    "{} values for {} frequencies",
                    values.len(),
                    frequencies.len()
                ),
            });
        }
        if frequencies.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter {
                name: "frequencies",
                reason: "must be strictly increasing".into(),
            });
        }
        Ok(Self {
            frequencies,
            values,
            axis,
            unit,
            metadata: Acquisition::default(),
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Restrict to bins with `lo <= f <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Result<Self> {
        let (f, v): (Vec<f64>, Vec<f64>) = self
            .frequencies
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, v)| (*f, *v))
            .unzip();
        let mut t = Self::new(f, v, self.axis, self.unit)?;
        t.metadata = self.metadata.clone();
        Ok(t)
    }

    pub fn to_csv(&self) -> String {
        write_csv(
            &["frequency_hz", self.unit.column()],
            &[&self.frequencies, &self.values],
        )
    }

    pub fn from_csv(text: &str) -> std::result::Result<Self, TableError> {
        let t = Table::parse(text)?;
        if t.header.len() != 2 || t.header[0] != "frequency_hz" {
            return Err(TableError::Invalid(format!(
                "expected header `frequency_hz,<psd column>`, found `{}`",
                t.header.join(",")
            )));
        }
        let unit = PsdUnit::from_column(&t.header[1]).ok_or_else(|| {
            TableError::Invalid(format!("unknown PSD column `{}`", t.header[1]))
        })?;
        Self::new(t.columns[0].clone(), t.columns[1].clone(), FrequencyAxis::PumpRelative, unit)
            .map_err(|e| TableError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "data")]
pub enum Samples {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Real(v) => v.len(),
            Samples::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMetadata {
    /// Column label for real traces.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub sample_rate: f64,
    pub t0: f64,
    pub samples: Samples,
    #[serde(default)]
    pub metadata: TraceMetadata,
}

const MAGIC: &[u8; 4] = b"EMTT";
const HEADER_LEN: usize = 40;

impl TimeTrace {
    pub fn new(sample_rate: f64, t0: f64, samples: Samples) -> Result<Self> {
        positive("sample_rate", sample_rate)?;
        if !t0.is_finite() {
            return Err(Error::NonFinite("t0"));
        }
        let finite = match &samples {
            Samples::Real(v) => v.iter().all(|x| x.is_finite()),
            Samples::Complex(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        };
        if !finite {
            return Err(Error::NonFinite("samples"));
        }
        Ok(Self {
            sample_rate,
            t0,
            samples,
            metadata: TraceMetadata::default(),
        })
    }

    pub fn real(sample_rate: f64, t0: f64, v: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, t0, Samples::Real(v))
    }

    pub fn complex(sample_rate: f64, t0: f64, v: Vec<Complex64>) -> Result<Self> {
        Self::new(sample_rate, t0, Samples::Complex(v))
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.metadata.label = Some(label.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.t0 + k as f64 / self.sample_rate)
            .collect()
    }

    /// Samples `range` as a new trace with its own start time.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TimeTrace {
        let samples = match &self.samples {
            Samples::Real(v) => Samples::Real(v[range.clone()].to_vec()),
            Samples::Complex(v) => Samples::Complex(v[range.clone()].to_vec()),
        };
        TimeTrace {
            sample_rate: self.sample_rate,
            t0: self.t0 + range.start as f64 / self.sample_rate,
            samples,
            metadata: self.metadata.clone(),
        }
    }

    /// Samples as complex numbers; real traces get a zero imaginary part.
    pub fn as_complex(&self) -> Vec<Complex64> {
        match &self.samples {
            Samples::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Samples::Complex(v) => v.clone(),
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match &self.samples {
            Samples::Real(v) => Some(v),
            Samples::Complex(_) => None,
        }
    }

    /// |x|² per sample, labelled `energy`.
    pub fn energy(&self) -> TimeTrace {
        let e = match &self.samples {
            Samples::Real(v) => v.iter().map(|x| x * x).collect(),
            Samples::Complex(v) => v.iter().map(|z| z.norm_sqr()).collect(),
        };
        TimeTrace {
            sample_rate: self.sample_rate,
            t0: self.t0,
            samples: Samples::Real(e),
            metadata: TraceMetadata {
                label: Some("energy".into()),
                ..self.metadata.clone()
            },
        }
    }

    pub fn to_csv(&self) -> String {
        let t = self.times();
        match &self.samples {
            Samples::Complex(v) => {
                let i: Vec<f64> = v.iter().map(|z| z.re).collect();
                let q: Vec<f64> = v.iter().map(|z| z.im).collect();
                write_csv(&["time_s", "i", "q"], &[&t, &i, &q])
            }
            Samples::Real(v) => {
                let label = self.metadata.label.as_deref().unwrap_or("value");
                write_csv(&["time_s", label], &[&t, v])
            }
        }
    }

    /// Reads `time_s,i,q` or `time_s,<label>`; the time column must be
    /// uniformly spaced.
    pub fn from_csv(text: &str) -> std::result::Result<Self, TableError> {
        let t = Table::parse(text)?;
        let time = t.column("time_s")?;
        if time.len() < 2 {
            return Err(TableError::Invalid("time trace needs at least two rows".into()));
        }
        let dt = time[1] - time[0];
        if dt <= 0.0 {
            return Err(TableError::Invalid(format!(
                "line {}: time must increase",
                t.lines[1]
            )));
        }
        for (k, w) in time.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(w[1].abs() * 1e-9) {
                return Err(TableError::Invalid(format!(
                    "line {}: non-uniform sampling (step {} vs {})",
                    t.lines[k + 1],
                    w[1] - w[0],
                    dt
                )));
            }
        }
        let samples = if t.has("i") && t.has("q") {
            let i = t.column("i")?;
            let q = t.column("q")?;
            Samples::Complex(i.iter().zip(q).map(|(a, b)| Complex64::new(*a, *b)).collect())
        } else if t.header.len() == 2 {
            Samples::Real(t.columns[1].clone())
        } else {
            return Err(TableError::Invalid(format!(
                "expected `time_s,i,q` or `time_s,<value>`, found `{}`",
                t.header.join(",")
            )));
        };
        let label = (t.header.len() == 2).then(|| t.header[1].clone());
        let span = time[time.len() - 1] - time[0];
        let fs = (time.len() - 1) as f64 / span;
        let mut trace =
            TimeTrace::new(fs, time[0], samples).map_err(|e| TableError::Invalid(e.to_string()))?;
        trace.metadata.label = label;
        Ok(trace)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (kind, n_f64) = match &self.samples {
            Samples::Real(v) => (0u32, v.len()),
            Samples::Complex(v) => (1u32, 2 * v.len()),
        };
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n_f64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&kind.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&self.t0.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        match &self.samples {
            Samples::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Samples::Complex(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParameter {
            name: "binary trace",
            reason: m.to_string(),
        };
        if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
            return Err(bad("missing EMTT header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if u32_at(4) != 1 {
            return Err(bad("unsupported version"));
        }
        let kind = u32_at(8);
        let fs = f64_at(16);
        let t0 = f64_at(24);
        let n = u64::from_le_bytes(bytes[32..40].try_into().unwrap()) as usize;
        let per = match kind {
            0 => 1,
            1 => 2,
            _ => return Err(bad("unknown sample kind")),
        };
        if bytes.len() != HEADER_LEN + 8 * per * n {
            return Err(bad("length does not match header"));
        }
        let vals: Vec<f64> = (0..per * n).map(|k| f64_at(HEADER_LEN + 8 * k)).collect();
        let samples = if kind == 0 {
            Samples::Real(vals)
        } else {
            Samples::Complex(vals.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
        };
        TimeTrace::new(fs, t0, samples)
    }
}

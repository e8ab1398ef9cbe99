use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _, Result};
use clap::ValueEnum;
use serde_json::{Map, Value};

use crate::config::Config;
use crate::plot::PlotFormat;
use crate::report::{Failure, InputDigest, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    Json,
}

/// Everything a command needs besides its own arguments.
pub struct Ctx {
    pub cfg: Config,
    pub cfg_digest: Option<InputDigest>,
    pub seed: u64,
    pub out: PathBuf,
    pub format: DataFormat,
    pub plot: PlotFormat,
}

impl Ctx {
    pub fn new(
        config: Option<&Path>,
        seed: u64,
        out: PathBuf,
        format: DataFormat,
        plot: PlotFormat,
    ) -> Result<Self> {
        let (cfg, cfg_digest) = match config {
            Some(p) => {
                let bytes = std::fs::read(p).with_context(|| format!("reading config {}", p.display()))?;
                (Config::load(p)?, Some(InputDigest::of(p, &bytes)))
            }
            None => (Config::default(), None),
        };
        std::fs::create_dir_all(&out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        Ok(Self {
            cfg,
            cfg_digest,
            seed,
            out,
            format,
            plot,
        })
    }

    pub fn report(&self, command: &str, inputs: Vec<InputDigest>) -> Report {
        Report::new(command, inputs, self.cfg_digest.as_ref())
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let p = self.out.join(name);
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    pub fn write_report(&self, stem: &str, r: &Report) -> Result<PathBuf> {
        self.write(&format!("{stem}.json"), &r.to_json())
    }

    /// Columns as CSV (`<stem>.csv`) or as a JSON object of arrays
    /// (`<stem>.json`), per `--format`.
    pub fn write_table(&self, stem: &str, header: &[&str], columns: &[&[f64]]) -> Result<PathBuf> {
        match self.format {
            DataFormat::Csv => self.write(&format!("{stem}.csv"), &emech::table::write_csv(header, columns)),
            DataFormat::Json => {
                let mut m = Map::new();
                for (h, c) in header.iter().zip(columns) {
                    m.insert(h.to_string(), Value::from(c.to_vec()));
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(m))?;
                s.push('\n');
                self.write(&format!("{stem}.json"), &s)
            }
        }
    }
}

/// Reads a file as text and fingerprints it.
pub fn read_input(path: &Path) -> Result<(String, InputDigest), Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Input(anyhow!("{}: {e}", path.display())))?;
    let digest = InputDigest::of(path, &bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| Failure::Input(anyhow!("{}: not valid UTF-8 text", path.display())))?;
    Ok((text, digest))
}

/// File name without extension, for naming outputs.
pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

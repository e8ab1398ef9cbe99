use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod cooling;
mod fit;
mod io;
mod plot;
mod report;
mod simulate;
mod summary;

use fit::FitKind;
use io::{Ctx, DataFormat};
use plot::PlotFormat;
use report::{Failure, Status};
use simulate::SimKind;

/// Fits, simulations and summaries for electromechanical sideband-cooling
/// experiments.
///
/// Exit codes: 0 success, 1 input error, 2 numerical failure.
#[derive(Parser)]
#[command(name = "emech", version)]
struct Cli {
    /// TOML config; every physical key carries its unit suffix.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Format of data tables and traces. Reports are always JSON.
    #[arg(long, global = true, value_enum, default_value_t = DataFormat::Csv)]
    format: DataFormat,
    #[arg(long, global = true, value_enum, default_value_t = PlotFormat::None)]
    plot: PlotFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one or more data files; one report per file.
    Fit {
        #[arg(value_enum)]
        kind: FitKind,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Generate synthetic data from the config.
    Simulate {
        #[arg(value_enum)]
        kind: SimKind,
    },
    /// Occupation against pump power, measured (from a sweep CSV with
    /// power_dbm|power_w, area[, area_err]) and/or modelled ([cooling]).
    CoolingCurve { sweep: Option<PathBuf> },
    /// Consolidate configs and reports into summary.json.
    Report { inputs: Vec<PathBuf> },
}

/// Returns the exit code; per-file fit failures are already on stderr.
fn exec(cli: Cli) -> Result<u8, Failure> {
    let ctx = Ctx::new(cli.config.as_deref(), cli.seed, cli.out, cli.format, cli.plot)?;
    let written = match cli.command {
        Command::Fit { kind, inputs } => {
            let mut code = 0;
            for o in fit::run(&ctx, kind, &inputs) {
                let failure = match o.result {
                    Ok(p) => {
                        println!("{}", p.display());
                        (o.status == Status::FitFailed).then(|| {
                            Failure::Numerical(format!(
                                "{}: fit did not converge, diagnostics in {}",
                                o.path.display(),
                                p.display()
                            ))
                        })
                    }
                    Err(e) => Some(e),
                };
                if let Some(f) = failure {
                    eprintln!("emech: {f}");
                    // an input error outranks a numerical one
                    code = if code == 0 { f.code() } else { code.min(f.code()) };
                }
            }
            return Ok(code);
        }
        Command::Simulate { kind } => simulate::run(&ctx, kind)?,
        Command::CoolingCurve { sweep } => cooling::run(&ctx, sweep.as_deref())?,
        Command::Report { inputs } => summary::run(&ctx, &inputs)?,
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match exec(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("emech: {f}");
            ExitCode::from(f.code())
        }
    }
}

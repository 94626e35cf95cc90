//! Command-line surface and the serializable run configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasecorr::quasiprob::{GridSpec, DEFAULT_ENSEMBLES};
use phasecorr::tomography::{DEFAULT_PHASE_BINS, DEFAULT_TOMOGRAPHY_CUTOFF};
use phasecorr::{Error, PhaseNoiseModel, PhaseSchedule, Result, SqueezingSpec};
use serde::{Deserialize, Serialize};

pub const TOOLKIT: &str = concat!("phasecorr ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(
    name = "phasecorr",
    version,
    about = "Phase-randomized two-mode squeezing toolkit"
)]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Upper bound on worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Replay the run configuration embedded in an earlier output file.
    #[arg(long, global = true, conflicts_with = "out")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate homodyne records of the lossy two-mode squeezed vacuum.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Reconstruct the two-mode density matrix by pattern-function tomography.
    #[command(allow_negative_numbers = true)]
    Tomo(TomoArgs),
    /// Sample the regularized P function with ensemble error bars.
    #[command(allow_negative_numbers = true)]
    Pomega(PomegaArgs),
    /// Scan the significance of the negativity over filter widths.
    #[command(allow_negative_numbers = true)]
    ScanWidth(ScanWidthArgs),
    /// Evaluate the entanglement-activation witness.
    #[command(allow_negative_numbers = true)]
    Witness(WitnessArgs),
    /// Evaluate the expected P function of the phase-randomized state.
    #[command(allow_negative_numbers = true)]
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct StateArgs {
    /// Squeezing before losses in dB.
    #[arg(
        long = "squeeze-db",
        conflicts_with = "r",
        required_unless_present = "r"
    )]
    pub squeeze_db: Option<f64>,
    /// Squeezing parameter r.
    #[arg(long = "r")]
    pub r: Option<f64>,
    /// Squeezing phase θ.
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    /// Detection efficiency per mode.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
}

impl StateArgs {
    pub fn spec(&self) -> Result<SqueezingSpec> {
        match (self.squeeze_db, self.r) {
            (Some(db), None) => SqueezingSpec::from_initial_db(db, self.theta, self.eta),
            (None, Some(r)) => SqueezingSpec::new(r, self.theta, self.eta),
            _ => Err(Error::invalid("give exactly one of --squeeze-db and --r")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    Uniform,
    BandLimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    BinCenters,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Hidden phase noise added to mode A.
    #[arg(long, value_enum, default_value_t = NoiseKind::None)]
    pub noise: NoiseKind,
    /// Standard deviation of band-limited noise in radians.
    #[arg(long = "noise-sigma", default_value_t = 0.5)]
    pub noise_sigma: f64,
    /// Correlation time of band-limited noise in records.
    #[arg(long = "correlation-time", default_value_t = 100.0)]
    pub correlation_time: f64,
    /// Number of records, for example 1e7.
    #[arg(long = "n")]
    pub n: RecordCount,
    /// Nominal local-oscillator phase schedule.
    #[arg(long, value_enum, default_value_t = ScheduleKind::BinCenters)]
    pub schedule: ScheduleKind,
    /// Phase bins per mode for the bin-center schedule.
    #[arg(long, default_value_t = DEFAULT_PHASE_BINS)]
    pub bins: usize,
}

impl SimulateArgs {
    pub fn noise_model(&self) -> PhaseNoiseModel {
        match self.noise {
            NoiseKind::None => PhaseNoiseModel::None,
            NoiseKind::Uniform => PhaseNoiseModel::Uniform,
            NoiseKind::BandLimited => PhaseNoiseModel::BandLimited {
                sigma: self.noise_sigma,
                correlation_time: self.correlation_time,
            },
        }
    }

    pub fn phase_schedule(&self) -> PhaseSchedule {
        match self.schedule {
            ScheduleKind::BinCenters => PhaseSchedule::BinCenters { n_bins: self.bins },
            ScheduleKind::Uniform => PhaseSchedule::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// Largest |α| on the grid.
    #[arg(long = "a-max", default_value_t = GridSpec::default().a_max)]
    pub a_max: f64,
    /// Largest |β| on the grid.
    #[arg(long = "b-max", default_value_t = GridSpec::default().b_max)]
    pub b_max: f64,
    /// Grid spacing.
    #[arg(long = "grid-step", default_value_t = GridSpec::default().step)]
    pub step: f64,
}

impl GridArgs {
    pub fn spec(&self) -> Result<GridSpec> {
        let g = GridSpec {
            a_max: self.a_max,
            b_max: self.b_max,
            step: self.step,
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TomoArgs {
    /// Dataset to read. Defaults to dataset.pqds in the output directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Photon-number cutoff per mode.
    #[arg(long, default_value_t = DEFAULT_TOMOGRAPHY_CUTOFF)]
    pub cutoff: usize,
    /// Phase bins per mode.
    #[arg(long, default_value_t = DEFAULT_PHASE_BINS)]
    pub bins: usize,
    /// Monte Carlo replicas for error bars. Zero disables them.
    #[arg(long = "mc-reps", default_value_t = 0)]
    pub mc_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PomegaArgs {
    /// Dataset to read. Defaults to dataset.pqds in the output directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Filter width.
    #[arg(long, default_value_t = 1.3)]
    pub w: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of equal ensembles for the error bars.
    #[arg(long, default_value_t = DEFAULT_ENSEMBLES)]
    pub ensembles: usize,
    /// Add the expected surface of the simulated state as a comparison column.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ScanWidthArgs {
    /// Dataset to read. Defaults to dataset.pqds in the output directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Widths as `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "1.0:1.8:0.1")]
    pub w: ValueList,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of equal ensembles for the error bars.
    #[arg(long, default_value_t = DEFAULT_ENSEMBLES)]
    pub ensembles: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct WitnessArgs {
    /// Squeezing parameter p of the source states.
    #[arg(long, default_value_t = 0.5, conflicts_with = "scan_p")]
    pub p: f64,
    /// Photon-number cutoff per mode.
    #[arg(long, default_value_t = 8)]
    pub cutoff: usize,
    /// Scan p as `start:stop:step` or a comma-separated list.
    #[arg(long = "scan-p")]
    pub scan_p: Option<ValueList>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Filter width.
    #[arg(long, default_value_t = 1.3)]
    pub w: f64,
    #[command(flatten)]
    pub grid: GridArgs,
}

/// A positive record count that also accepts scientific notation such as `1e7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordCount(pub usize);

impl FromStr for RecordCount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Ok(n) = s.parse::<usize>() {
            return Ok(RecordCount(n));
        }
        let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53)) {
            return Err(format!("`{s}` is not a whole record count"));
        }
        Ok(RecordCount(v as usize))
    }
}

impl fmt::Display for RecordCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Values given as an inclusive `start:stop:step` range or a comma-separated list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueList(pub Vec<f64>);

impl FromStr for ValueList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        };
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [start, stop, step] => {
                let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
                if !(step > 0.0) || stop < start {
                    return Err("a range needs start <= stop and a positive step".into());
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=count)
                    .map(|k| ((start + k as f64 * step) * 1e10).round() / 1e10)
                    .collect()
            }
            [_] => s
                .split(',')
                .map(num)
                .collect::<std::result::Result<Vec<_>, _>>()?,
            _ => return Err("expected start:stop:step or a comma-separated list".into()),
        };
        if values.is_empty() {
            return Err("the list is empty".into());
        }
        Ok(ValueList(values))
    }
}

impl fmt::Display for ValueList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Everything that determines the contents of a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub command: Command,
}

impl RunConfig {
    /// Recovers the configuration embedded in a JSON or CSV output.
    pub fn from_output(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let value: serde_json::Value = match text.lines().next() {
            Some(line) if line.starts_with('#') => {
                let json = line
                    .split_once("run=")
                    .ok_or_else(|| bad("CSV comment carries no run configuration"))?
                    .1;
                serde_json::from_str(json)?
            }
            _ => {
                let doc: serde_json::Value = serde_json::from_str(&text)?;
                doc.get("run")
                    .cloned()
                    .ok_or_else(|| bad("document carries no run configuration"))?
            }
        };
        Ok(serde_json::from_value(value)?)
    }
}

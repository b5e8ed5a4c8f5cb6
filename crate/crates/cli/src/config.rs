use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MomentKind {
    Gaussian,
    Free,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Wigner,
    Diagonal,
    Band,
    Spiked,
    Random,
    SosChaos,
}

/// A validated command line.
#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "freelens", version, about = "Gaussian random matrix models and free-probability norms")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Output format for the main report.
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: Format,

    /// Write the main report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// sigma, v, the sigma_* bracket and v_tilde of a model.
    Params(ParamsArgs),
    /// Every applicable norm bound for a model.
    Bounds(BoundsArgs),
    /// Norm of the free model via Lehner's formula.
    Lehner(LehnerArgs),
    /// Exact Gaussian and free trace moments.
    Moments(MomentsArgs),
    /// Monte Carlo norm and spectrum statistics.
    Sample(SampleArgs),
    /// Top eigenvalue of spiked Wigner matrices over a grid of spikes.
    SpikedSweep(SweepArgs),
    /// Kikuchi spectral detection trials for spiked tensor PCA.
    Kikuchi(KikuchiArgs),
    /// Flattening parameters, bounds and samples of a matrix chaos.
    Chaos(ChaosArgs),
    /// Write a builtin model or chaos tensor as JSON.
    ModelGen(GenArgs),
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ParamsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Universal constant C.
    #[arg(long, default_value_t = 1.0)]
    pub constant: f64,
    /// Deviation level for the tail statements.
    #[arg(long)]
    pub t: Option<f64>,
    /// Almost-sure bound R on the summands, enabling the Bernstein-type bounds.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct LehnerArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = freelens::lehner::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = freelens::lehner::DEFAULT_MAX_OUTER)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct MomentsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub p: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub kind: MomentKind,
    /// Monte Carlo cross-check with this many trials.
    #[arg(long)]
    pub mc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV of every sampled eigenvalue (trial, index, eigenvalue).
    #[arg(long)]
    pub spectrum_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambdas: Vec<f64>,
    #[arg(long)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct KikuchiArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub l: usize,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = freelens::kikuchi::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Args)]
#[command(group(ArgGroup::new("task").required(true).multiple(true).args(["sigma", "v", "bound", "sample"])))]
pub struct ChaosArgs {
    #[arg(long)]
    pub tensor: PathBuf,
    #[arg(long)]
    pub sigma: bool,
    #[arg(long)]
    pub v: bool,
    /// Iterated flattening bound with constant C_q.
    #[arg(long, value_name = "CQ")]
    pub bound: Option<f64>,
    /// Monte Carlo mean norm over N draws.
    #[arg(long, value_name = "N")]
    pub sample: Option<usize>,
    /// Sample the coupled chaos (distinct indices, q <= 3) instead of the decoupled one.
    #[arg(long)]
    pub coupled: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long)]
    pub d: usize,
    /// Column dimension for rectangular random models.
    #[arg(long)]
    pub d2: Option<usize>,
    /// Number of coefficients (random) or chaos coordinates (sos-chaos).
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub bandwidth: i64,
    /// Spike strength along e1.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Give random models a nonzero A0.
    #[arg(long)]
    pub mean: bool,
    /// Store coefficients as triplets.
    #[arg(long)]
    pub sparse: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn existing(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("no such file: {}", path.display())))
    }
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be > 0, got {x}")))
    }
}

impl RunConfig {
    fn validate(self) -> Result<Self, CliError> {
        match &self.command {
            Command::Params(a) => existing(&a.model)?,
            Command::Bounds(a) => {
                existing(&a.model)?;
                positive("constant", a.constant)?;
            }
            Command::Lehner(a) => {
                existing(&a.model)?;
                positive("tol", a.tol)?;
            }
            Command::Moments(a) => existing(&a.model)?,
            Command::Sample(a) => existing(&a.model)?,
            Command::Chaos(a) => {
                existing(&a.tensor)?;
                if let Some(c) = a.bound {
                    positive("bound", c)?;
                }
            }
            Command::SpikedSweep(_) | Command::Kikuchi(_) | Command::ModelGen(_) => {}
        }
        Ok(self)
    }
}

/// Parses `argv` without the program name. Help and version requests come
/// back as [`CliError::Help`].
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let full = std::iter::once(OsString::from("freelens")).chain(argv.into_iter().map(Into::into));
    match RunConfig::try_parse_from(full) {
        Ok(config) => config.validate(),
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Err(CliError::Help(e.to_string())),
            _ => {
                let text = e.to_string();
                let line = text.lines().next().unwrap_or_default();
                Err(CliError::Usage(line.trim_start_matches("error: ").to_string()))
            }
        },
    }
}

//! Command-line front end: rate and bound tables, figure data, scheme
//! verification and Monte-Carlo runs.

mod commands;
mod config;
pub mod csv;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_bounds, cmd_fig3, cmd_fig4, cmd_prelog, cmd_rates, cmd_simulate, cmd_verify};
pub use config::{parse_etas, parse_grid, parse_list};

/// Classification tolerance used when no `--tol` is given.
pub const DEFAULT_TOL: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(
    name = "fbcast",
    version,
    about = "Feedback coding schemes and capacity bounds for Gaussian BCs and ICs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Achievable rates and bounds with classification flags, one row per grid point.
    Rates(Opts),
    /// Upper bounds only, one row per grid point.
    Bounds(Opts),
    /// Power offset over a correlation grid (`rho,gamma`).
    Fig3(Opts),
    /// Optimized sum rate normalized by the single-user rate (`P,rho,ratio`).
    Fig4(Opts),
    /// Checks causality, cancellation, power and closed-form rates; JSON report.
    SchemeVerify(Opts),
    /// Monte-Carlo estimate of the equivalent channel.
    Simulate(Opts),
    /// Least-squares prelog slopes over a power grid.
    Prelog(Opts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    P2p,
    Bc2,
    Bck,
    Ic,
}

/// Flags shared by all subcommands. Grids accept `a,b,c`, `a:b:n` (linear)
/// or `log:a:b:n` (logarithmic).
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Transmit power grid.
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<String>,
    /// Noise variance at receiver 1 (or of the point-to-point link).
    #[arg(long, allow_hyphen_values = true)]
    pub s1: Option<f64>,
    /// Noise variance at receiver 2.
    #[arg(long, allow_hyphen_values = true)]
    pub s2: Option<f64>,
    /// Noise correlation grid.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<String>,
    /// K-user noise scalings, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: Option<String>,
    /// Interference gains `a11,a12,a21,a22`.
    #[arg(long, allow_hyphen_values = true)]
    pub gains: Option<String>,
    /// Block lengths: `n`, `a,b,c` or `a..b`.
    #[arg(long)]
    pub eta: Option<String>,
    /// Power fraction for the closed-form partial-correlation choice.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed; defaults to `FBCAST_SEED`, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Tolerance for the degraded / fully-correlated classification.
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    /// Feedback noise variance towards receiver 1.
    #[arg(long, allow_hyphen_values = true)]
    pub sw1: Option<f64>,
    /// Feedback noise variance towards receiver 2.
    #[arg(long, allow_hyphen_values = true)]
    pub sw2: Option<f64>,
    /// Explicit two-user scheme parameter delta (with `--q`).
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    /// Correlation-schedule exponents for `prelog`.
    #[arg(long, allow_hyphen_values = true)]
    pub zeta: Option<String>,
    /// Correlation-schedule sign, `1` or `-1`.
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<f64>,
    /// Correlation-schedule factor `c` in `s (1 - c / P^zeta)`.
    #[arg(long, allow_hyphen_values = true)]
    pub factor: Option<f64>,
}

/// A command failure with its exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invariant failed: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Input(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Rendered command output; `failure` names the first failing invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub failure: Option<String>,
}

impl Output {
    pub fn ok(text: String) -> Self {
        Output { text, failure: None }
    }
}

/// Runs one subcommand on fully resolved options.
pub fn execute(command: &Command) -> Result<Output, CliError> {
    let (f, opts): (fn(&Opts) -> Result<Output, CliError>, &Opts) = match command {
        Command::Rates(o) => (cmd_rates, o),
        Command::Bounds(o) => (cmd_bounds, o),
        Command::Fig3(o) => (cmd_fig3, o),
        Command::Fig4(o) => (cmd_fig4, o),
        Command::SchemeVerify(o) => (cmd_verify, o),
        Command::Simulate(o) => (cmd_simulate, o),
        Command::Prelog(o) => (cmd_prelog, o),
    };
    let opts = config::resolve(opts)?;
    let out = f(&opts)?;
    match &opts.out {
        Some(path) => write_atomic(path, &out.text)?,
        None => print!("{}", out.text),
    }
    Ok(out)
}

fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{}: not a file path", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, text).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CliError::Io(format!("{}: {e}", path.display()))
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(Output { failure: None, .. }) => 0,
        Ok(Output {
            failure: Some(name), ..
        }) => {
            eprintln!("fbcast: invariant failed: {name}");
            1
        }
        Err(e) => {
            eprintln!("fbcast: {e}");
            e.exit_code()
        }
    }
}

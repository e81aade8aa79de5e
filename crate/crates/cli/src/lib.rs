//! The `inexact` command-line driver: argument parsing, run specs and the
//! subcommands that write CSV and graymap outputs.

pub mod commands;
pub mod output;
pub mod spec;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use inexact_core::igd::ConfigError;
use inexact_core::lasso::LassoError;
use inexact_core::trace::TraceError;
use thiserror::Error;

pub use commands::{execute, RUNSPEC_FILE};
pub use spec::{Command, RunSpec, Timing};

use spec::{ConfigFile, DeblurFlags, GenFlags, GridFlags, IgdFlags, LassoFlags, RatesFlags};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Lasso(#[from] LassoError),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.0)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_ERROR,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "inexact", version, about = "Inexact gradient solvers and Lasso benchmarks")]
pub struct Cli {
    /// Output directory [default: $INEXACT_OUT/<subcommand>, else inexact-out/<subcommand>]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Settings file of `key = value` lines; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw of the run [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `none` zeroes time columns so outputs are byte-reproducible [default: none]
    #[arg(long, global = true, value_enum)]
    pub timing: Option<Timing>,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Inexact gradient descent on a zoo function or a least-squares instance
    Igd(IgdFlags),
    /// One GIALM or IALM run on a Lasso instance
    Lasso(LassoFlags),
    /// Random Lasso instances × method presets, one summary row per pair
    LassoGrid(GridFlags),
    /// Convergence-rate fits on the power test functions
    Rates(RatesFlags),
    /// Image deblurring with every requested method
    Deblur(DeblurFlags),
    /// Write a random Lasso instance file and its sidecar
    GenInstance(GenFlags),
    /// Execute a saved runspec.json again
    Replay {
        spec: PathBuf,
    },
}

/// Turns parsed arguments into a run spec, applying the config file and
/// defaults underneath the flags.
pub fn resolve(cli: Cli) -> Result<RunSpec, CliError> {
    if let Sub::Replay { spec } = &cli.command {
        if cli.config.is_some() || cli.seed.is_some() {
            return Err(CliError::Usage("replay takes only --out and --timing".into()));
        }
        let text = fs::read_to_string(spec)?;
        let mut run: RunSpec = serde_json::from_str(&text)?;
        if let Some(out) = cli.out {
            run.out_dir = out;
        }
        if let Some(t) = cli.timing {
            run.timing = t;
        }
        return Ok(run);
    }

    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let seed = cfg.pick(cli.seed, "seed", 0)?;
    let timing = cfg.pick(cli.timing, "timing", Timing::None)?;
    let out = cfg.pick_opt(cli.out, "out")?;
    let command = match cli.command {
        Sub::Igd(f) => Command::Igd(spec::resolve_igd(f, &cfg)?),
        Sub::Lasso(f) => Command::Lasso(spec::resolve_lasso(f, &cfg)?),
        Sub::LassoGrid(f) => Command::LassoGrid(spec::resolve_grid(f, &cfg, seed)?),
        Sub::Rates(f) => Command::Rates(spec::resolve_rates(f, &cfg)?),
        Sub::Deblur(f) => Command::Deblur(spec::resolve_deblur(f, &cfg)?),
        Sub::GenInstance(f) => Command::GenInstance(spec::resolve_gen(f, &cfg)?),
        Sub::Replay { .. } => unreachable!("handled above"),
    };
    cfg.finish()?;
    let out_dir = out.unwrap_or_else(|| spec::default_out_dir(command.name()));
    Ok(RunSpec {
        command,
        out_dir,
        seed,
        timing,
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
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match resolve(cli).and_then(|spec| execute(&spec)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

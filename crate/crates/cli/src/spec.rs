//! Resolved run descriptions and the flag/config/preset layering that
//! produces them.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use inexact_core::igd::DEFAULT_I_MAX;
use inexact_core::lasso::{GammaMode, LassoMethod, LassoOptions, MAX_BLUR_SIDE};
use inexact_core::problem::ZOO_NAMES;
use inexact_core::rates::RateSuite;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "INEXACT_OUT";
pub const DEFAULT_OUT_ROOT: &str = "inexact-out";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    /// Zero every time column so outputs depend only on the spec.
    #[default]
    None,
    Wall,
}

impl FromStr for Timing {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Timing::None),
            "wall" => Ok(Timing::Wall),
            _ => Err(format!("unknown timing {s:?} (expected none or wall)")),
        }
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub command: Command,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    Igd(IgdSpec),
    Lasso(LassoSpec),
    LassoGrid(GridSpec),
    Rates(RatesSpec),
    Deblur(DeblurSpec),
    GenInstance(GenSpec),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Igd(_) => "igd",
            Command::Lasso(_) => "lasso",
            Command::LassoGrid(_) => "lasso-grid",
            Command::Rates(_) => "rates",
            Command::Deblur(_) => "deblur",
            Command::GenInstance(_) => "gen-instance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Exact,
    Ffd,
    Cfd,
    Noisy,
}

impl FromStr for OracleKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as clap::ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSource {
    Zoo(String),
    /// Dense Lasso instance file, minimised as `½‖Ax − b‖²`.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgdSpec {
    pub problem: ProblemSource,
    pub oracle: OracleKind,
    pub mu: f64,
    pub eps1: f64,
    pub theta: f64,
    /// Gradient Lipschitz constant; the problem's own when absent.
    pub lipschitz: Option<f64>,
    pub i_max: u32,
    pub max_outer: usize,
    pub eps_tol: f64,
    pub grad_tol: f64,
    pub time_budget_s: Option<f64>,
    /// Starting point; drawn from the seed when absent.
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LassoSource {
    Random { m: usize, n: usize, gamma: GammaMode },
    File(PathBuf),
}

/// Solver settings shared by the Lasso commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSolverSpec {
    /// Proximal parameter; the instance default when absent.
    pub lambda: Option<f64>,
    pub eta_tol: f64,
    pub max_outer: usize,
    pub time_budget_s: Option<f64>,
    pub max_inner: u64,
    pub eps1: f64,
    pub theta: f64,
}

impl LassoSolverSpec {
    pub fn options(&self) -> LassoOptions {
        LassoOptions {
            lambda: self.lambda,
            eta_tol: self.eta_tol,
            max_outer: self.max_outer,
            time_budget: self.time_budget_s.map(Duration::from_secs_f64),
            max_inner: self.max_inner,
            eps1: self.eps1,
            theta: self.theta,
            x0: None,
            record_iterates: false,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(l) = self.lambda {
            positive("lambda", l)?;
        }
        positive("eps1", self.eps1)?;
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return usage(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.eta_tol >= 0.0) {
            return usage("eta-tol must be nonnegative");
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return usage("iteration caps must be at least 1");
        }
        if let Some(t) = self.time_budget_s {
            positive("time-budget", t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSpec {
    pub source: LassoSource,
    pub method: LassoMethod,
    pub solver: LassoSolverSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub ms: Vec<usize>,
    pub ns: Vec<usize>,
    pub gammas: Vec<GammaMode>,
    pub seeds: Vec<u64>,
    pub methods: Vec<LassoMethod>,
    pub solver: LassoSolverSpec,
    /// Worker threads. Cell results never depend on it.
    pub workers: usize,
    pub traces: bool,
}

/// One instance of the grid, numbered from 1 in `m, n, γ, seed` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridInstance {
    pub test_id: usize,
    pub m: usize,
    pub n: usize,
    pub gamma: GammaMode,
    pub seed: u64,
}

impl GridSpec {
    pub fn instances(&self) -> Vec<GridInstance> {
        let mut out = Vec::new();
        for &m in &self.ms {
            for &n in &self.ns {
                for &gamma in &self.gammas {
                    for &seed in &self.seeds {
                        out.push(GridInstance {
                            test_id: out.len() + 1,
                            m,
                            n,
                            gamma,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesSpec {
    pub powers: Vec<f64>,
    pub dim: usize,
    pub radius: f64,
    pub mu: f64,
    pub max_outer: usize,
    pub window_start: usize,
}

impl RatesSpec {
    pub fn suite(&self, seed: u64) -> RateSuite {
        RateSuite {
            powers: self.powers.clone(),
            dim: self.dim,
            radius: self.radius,
            mu: self.mu,
            max_outer: self.max_outer,
            window_start: self.window_start,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeblurSpec {
    pub side: usize,
    pub kernel_radius: usize,
    pub kernel_sigma: f64,
    pub noise: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub iters: usize,
    pub methods: Vec<LassoMethod>,
    pub max_inner: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub m: usize,
    pub n: usize,
    pub gamma: GammaMode,
    pub file_name: String,
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        usage(format!("{name} must be positive and finite, got {v}"))
    }
}

/// Comma-separated list argument. An empty string is an empty list.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<T>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()
            .map(List)
    }
}

/// `scaled:<factor>` (γ = factor·‖Aᵀb‖∞) or `abs:<value>`; a bare number is
/// absolute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaArg(pub GammaMode);

impl FromStr for GammaArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |v: &str| v.parse::<f64>().map_err(|e| format!("bad gamma {v:?}: {e}"));
        let mode = if let Some(v) = s.strip_prefix("scaled:") {
            GammaMode::Scaled(num(v)?)
        } else if let Some(v) = s.strip_prefix("abs:") {
            GammaMode::Absolute(num(v)?)
        } else {
            GammaMode::Absolute(num(s)?)
        };
        let (GammaMode::Scaled(v) | GammaMode::Absolute(v)) = mode;
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("gamma must be positive, got {s:?}"));
        }
        Ok(GammaArg(mode))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodArg(pub LassoMethod);

impl FromStr for MethodArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let m = LassoMethod::parse(s).ok_or_else(|| format!("unknown method {s:?} (expected GIALM-<mu> or IALM-<q>)"))?;
        match m {
            LassoMethod::Gialm { mu } if !(mu > 1.0) => Err(format!("{s}: mu must exceed 1")),
            LassoMethod::Ialm { q } if !(q > 1.0) => Err(format!("{s}: q must exceed 1")),
            _ => Ok(MethodArg(m)),
        }
    }
}

/// Plain `key = value` settings file. Blank lines and `#` comments are
/// skipped; keys are long flag names, with `_` and `-` interchangeable.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("config line {}: expected key = value", i + 1));
            };
            values.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(ConfigFile {
            values,
            used: RefCell::default(),
        })
    }

    fn lookup<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let Some(raw) = self.values.get(key) else {
            return Ok(None);
        };
        self.used.borrow_mut().insert(key.to_string());
        raw.parse()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("config key {key}: {e}")))
    }

    /// Flag if given, else the config entry, else `None`.
    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let from_file = self.lookup(key)?;
        Ok(flag.or(from_file))
    }

    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.pick_opt(flag, key)?.unwrap_or(default))
    }

    /// Fails on keys nothing asked for, which are almost always typos.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            usage(format!("unknown config keys: {}", unknown.join(", ")))
        }
    }
}

pub fn default_out_dir(subcommand: &str) -> PathBuf {
    let root = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
    root.join(subcommand)
}

#[derive(Debug, clap::Args)]
pub struct IgdFlags {
    /// Zoo function name (quad, aniso, spd, lsq, logistic, pseudo_huber, cosine, logcosh, kl4, smooth_l1)
    #[arg(long = "fn")]
    pub function: Option<String>,
    /// Instance file; solved as the least-squares part ½‖Ax − b‖²
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Gradient oracle [default: noisy]
    #[arg(long)]
    pub oracle: Option<OracleKind>,
    /// Acceptance factor μ > 1 [default: 3]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Initial error tolerance [default: 1]
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Tolerance shrink factor in (0, 1) [default: 0.8]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Gradient Lipschitz constant [default: the problem's own]
    #[arg(long)]
    pub lipschitz: Option<f64>,
    /// Inner tolerance reductions per step before a certificate is issued [default: 60]
    #[arg(long)]
    pub i_max: Option<u32>,
    /// Outer iteration cap [default: 100000]
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Stop once the tolerance falls below this [default: 1e-10]
    #[arg(long)]
    pub eps_tol: Option<f64>,
    /// Stop once the estimated gradient norm falls below this [default: 0]
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Wall-clock budget in seconds
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Start point as a comma list [default: seeded random point]
    #[arg(long)]
    pub x0: Option<List<f64>>,
}

pub fn resolve_igd(f: IgdFlags, cfg: &ConfigFile) -> Result<IgdSpec, CliError> {
    let function = cfg.pick_opt(f.function, "fn")?;
    let instance = cfg.pick_opt(f.instance, "instance")?;
    let problem = match (function, instance) {
        (Some(_), Some(_)) => return usage("give either --fn or --instance, not both"),
        (Some(name), None) => {
            if !ZOO_NAMES.contains(&name.as_str()) {
                return usage(format!("unknown function {name:?}; known: {}", ZOO_NAMES.join(", ")));
            }
            ProblemSource::Zoo(name)
        }
        (None, Some(path)) => ProblemSource::File(path),
        (None, None) => return usage("igd needs --fn <name> or --instance <file>"),
    };
    let spec = IgdSpec {
        problem,
        oracle: cfg.pick(f.oracle, "oracle", OracleKind::Noisy)?,
        mu: cfg.pick(f.mu, "mu", 3.0)?,
        eps1: cfg.pick(f.eps1, "eps1", 1.0)?,
        theta: cfg.pick(f.theta, "theta", 0.8)?,
        lipschitz: cfg.pick_opt(f.lipschitz, "lipschitz")?,
        i_max: cfg.pick(f.i_max, "i-max", DEFAULT_I_MAX)?,
        max_outer: cfg.pick(f.max_outer, "max-outer", 100_000)?,
        eps_tol: cfg.pick(f.eps_tol, "eps-tol", 1e-10)?,
        grad_tol: cfg.pick(f.grad_tol, "grad-tol", 0.0)?,
        time_budget_s: cfg.pick_opt(f.time_budget, "time-budget")?,
        x0: cfg.pick_opt(f.x0, "x0")?.map(|l| l.0),
    };
    if let Some(t) = spec.time_budget_s {
        positive("time-budget", t)?;
    }
    Ok(spec)
}

#[derive(Debug, clap::Args)]
pub struct SolverFlags {
    /// Penalty parameter λ [default: the instance's]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Stop once the KKT residual η falls below this [default: 1e-6]
    #[arg(long)]
    pub eta_tol: Option<f64>,
    /// Outer iteration cap [default: 200000]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Wall-clock budget in seconds per run
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Cap on total inner iterations [default: 10000000]
    #[arg(long)]
    pub max_inner: Option<u64>,
    /// Initial inner tolerance for GIALM [default: 1]
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Inner tolerance shrink factor for GIALM [default: 0.8]
    #[arg(long)]
    pub theta: Option<f64>,
}

fn resolve_solver(f: SolverFlags, cfg: &ConfigFile) -> Result<LassoSolverSpec, CliError> {
    let d = LassoOptions::default();
    let s = LassoSolverSpec {
        lambda: cfg.pick_opt(f.lambda, "lambda")?,
        eta_tol: cfg.pick(f.eta_tol, "eta-tol", d.eta_tol)?,
        max_outer: cfg.pick(f.max_iter, "max-iter", d.max_outer)?,
        time_budget_s: cfg.pick_opt(f.time_budget, "time-budget")?,
        max_inner: cfg.pick(f.max_inner, "max-inner", d.max_inner)?,
        eps1: cfg.pick(f.eps1, "eps1", d.eps1)?,
        theta: cfg.pick(f.theta, "theta", d.theta)?,
    };
    s.validate()?;
    Ok(s)
}

#[derive(Debug, clap::Args)]
pub struct LassoFlags {
    /// Instance file written by gen-instance
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Rows of a random instance [default: 100]
    #[arg(long)]
    pub m: Option<usize>,
    /// Columns of a random instance [default: 200]
    #[arg(long)]
    pub n: Option<usize>,
    /// `scaled:<f>` (f·‖Aᵀb‖∞), `abs:<v>` or a bare value [default: scaled:1e-3]
    #[arg(long)]
    pub gamma_mode: Option<GammaArg>,
    /// GIALM-<μ> or IALM-<q> [default: GIALM-1.1]
    #[arg(long)]
    pub method: Option<MethodArg>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

const DEFAULT_GAMMA: GammaMode = GammaMode::Scaled(1e-3);

pub fn resolve_lasso(f: LassoFlags, cfg: &ConfigFile) -> Result<LassoSpec, CliError> {
    let instance = cfg.pick_opt(f.instance, "instance")?;
    let m = cfg.pick(f.m, "m", 100)?;
    let n = cfg.pick(f.n, "n", 200)?;
    let gamma = cfg.pick(f.gamma_mode, "gamma-mode", GammaArg(DEFAULT_GAMMA))?.0;
    let source = match instance {
        Some(path) => LassoSource::File(path),
        None => {
            if m == 0 || n == 0 {
                return usage("m and n must be positive");
            }
            LassoSource::Random { m, n, gamma }
        }
    };
    Ok(LassoSpec {
        source,
        method: cfg.pick(f.method, "method", MethodArg(LassoMethod::PRESETS[0]))?.0,
        solver: resolve_solver(f.solver, cfg)?,
    })
}

#[derive(Debug, clap::Args)]
pub struct GridFlags {
    /// Row counts [default: 100,200]
    #[arg(long)]
    pub m: Option<List<usize>>,
    /// Column counts [default: 200,400]
    #[arg(long)]
    pub n: Option<List<usize>>,
    /// Gamma modes, see `lasso --help` [default: scaled:1e-3]
    #[arg(long)]
    pub gamma_mode: Option<List<GammaArg>>,
    /// Instance seeds [default: --seed]
    #[arg(long)]
    pub seeds: Option<List<u64>>,
    /// Method presets [default: GIALM-1.1,IALM-2]
    #[arg(long)]
    pub methods: Option<List<MethodArg>>,
    /// Worker threads [default: 1]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write per-cell trace and residual files
    #[arg(long)]
    pub traces: bool,
    #[command(flatten)]
    pub solver: SolverFlags,
}

pub fn resolve_grid(f: GridFlags, cfg: &ConfigFile, seed: u64) -> Result<GridSpec, CliError> {
    let spec = GridSpec {
        ms: cfg.pick(f.m, "m", List(vec![100, 200]))?.0,
        ns: cfg.pick(f.n, "n", List(vec![200, 400]))?.0,
        gammas: cfg
            .pick(f.gamma_mode, "gamma-mode", List(vec![GammaArg(DEFAULT_GAMMA)]))?
            .0
            .into_iter()
            .map(|g| g.0)
            .collect(),
        seeds: cfg.pick(f.seeds, "seeds", List(vec![seed]))?.0,
        methods: cfg
            .pick(f.methods, "methods", List(vec![MethodArg(LassoMethod::PRESETS[0]), MethodArg(LassoMethod::PRESETS[3])]))?
            .0
            .into_iter()
            .map(|m| m.0)
            .collect(),
        workers: cfg.pick(f.workers, "workers", 1)?,
        traces: flag_bool(f.traces, "traces", cfg)?,
        solver: resolve_solver(f.solver, cfg)?,
    };
    if spec.instances().is_empty() || spec.methods.is_empty() {
        return usage("the grid is empty");
    }
    if spec.ms.contains(&0) || spec.ns.contains(&0) {
        return usage("m and n must be positive");
    }
    if spec.workers == 0 {
        return usage("workers must be at least 1");
    }
    Ok(spec)
}

fn flag_bool(flag: bool, key: &str, cfg: &ConfigFile) -> Result<bool, CliError> {
    cfg.pick(flag.then_some(true), key, false)
}

#[derive(Debug, clap::Args)]
pub struct RatesFlags {
    /// Exponents p ≥ 2 of the test functions [default: 2,4]
    #[arg(long)]
    pub powers: Option<List<f64>>,
    /// Dimension [default: 3]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Radius of the region holding the start point [default: 2]
    #[arg(long)]
    pub radius: Option<f64>,
    /// Acceptance factor μ > 1 [default: 3]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Iterations per run [default: 10000]
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// First iteration of the fit window [default: 10]
    #[arg(long)]
    pub window_start: Option<usize>,
}

pub fn resolve_rates(f: RatesFlags, cfg: &ConfigFile) -> Result<RatesSpec, CliError> {
    let d = RateSuite::default();
    let spec = RatesSpec {
        powers: cfg.pick(f.powers, "powers", List(d.powers))?.0,
        dim: cfg.pick(f.dim, "dim", d.dim)?,
        radius: cfg.pick(f.radius, "radius", d.radius)?,
        mu: cfg.pick(f.mu, "mu", d.mu)?,
        max_outer: cfg.pick(f.max_outer, "max-outer", d.max_outer)?,
        window_start: cfg.pick(f.window_start, "window-start", d.window_start)?,
    };
    if spec.powers.is_empty() {
        return usage("no powers given");
    }
    if let Some(p) = spec.powers.iter().find(|p| !(**p >= 2.0 && p.is_finite())) {
        return usage(format!("power p = {p} is not supported (need p >= 2)"));
    }
    if spec.dim == 0 || spec.max_outer == 0 {
        return usage("dim and max-outer must be positive");
    }
    positive("radius", spec.radius)?;
    if !(spec.mu > 1.0) {
        return usage(format!("mu must exceed 1, got {}", spec.mu));
    }
    Ok(spec)
}

#[derive(Debug, clap::Args)]
pub struct DeblurFlags {
    /// Image side in pixels, at most 64 [default: 32]
    #[arg(long)]
    pub side: Option<usize>,
    /// Blur kernel radius [default: 4]
    #[arg(long)]
    pub radius: Option<usize>,
    /// Blur kernel width [default: 4]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Observation noise level [default: 1e-3]
    #[arg(long)]
    pub noise: Option<f64>,
    /// ℓ1 weight [default: 1e-4]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Penalty parameter λ [default: 5]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Outer iterations per method [default: 500]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Method presets [default: GIALM-1.1,GIALM-3,IALM-1.5,IALM-2]
    #[arg(long)]
    pub methods: Option<List<MethodArg>>,
    /// Cap on total inner iterations [default: 10000000]
    #[arg(long)]
    pub max_inner: Option<u64>,
}

pub fn resolve_deblur(f: DeblurFlags, cfg: &ConfigFile) -> Result<DeblurSpec, CliError> {
    let spec = DeblurSpec {
        side: cfg.pick(f.side, "side", 32)?,
        kernel_radius: cfg.pick(f.radius, "radius", 4)?,
        kernel_sigma: cfg.pick(f.sigma, "sigma", 4.0)?,
        noise: cfg.pick(f.noise, "noise", 1e-3)?,
        gamma: cfg.pick(f.gamma, "gamma", 1e-4)?,
        lambda: cfg.pick(f.lambda, "lambda", 5.0)?,
        iters: cfg.pick(f.iters, "iters", 500)?,
        methods: cfg
            .pick(f.methods, "methods", List(LassoMethod::PRESETS.map(MethodArg).to_vec()))?
            .0
            .into_iter()
            .map(|m| m.0)
            .collect(),
        max_inner: cfg.pick(f.max_inner, "max-inner", LassoOptions::default().max_inner)?,
    };
    if spec.side == 0 || spec.side > MAX_BLUR_SIDE {
        return usage(format!(
            "side {} is outside 1..={MAX_BLUR_SIDE}; larger images are not supported",
            spec.side
        ));
    }
    positive("gamma", spec.gamma)?;
    positive("lambda", spec.lambda)?;
    positive("sigma", spec.kernel_sigma)?;
    if !(spec.noise >= 0.0) {
        return usage("noise must be nonnegative");
    }
    if spec.iters == 0 || spec.methods.is_empty() {
        return usage("need at least one iteration and one method");
    }
    Ok(spec)
}

#[derive(Debug, clap::Args)]
pub struct GenFlags {
    /// Rows [default: 100]
    #[arg(long)]
    pub m: Option<usize>,
    /// Columns [default: 200]
    #[arg(long)]
    pub n: Option<usize>,
    /// Gamma mode, see `lasso --help` [default: scaled:1e-3]
    #[arg(long)]
    pub gamma_mode: Option<GammaArg>,
    /// File name inside the output directory [default: instance.bin]
    #[arg(long)]
    pub name: Option<String>,
}

pub fn resolve_gen(f: GenFlags, cfg: &ConfigFile) -> Result<GenSpec, CliError> {
    let spec = GenSpec {
        m: cfg.pick(f.m, "m", 100)?,
        n: cfg.pick(f.n, "n", 200)?,
        gamma: cfg.pick(f.gamma_mode, "gamma-mode", GammaArg(DEFAULT_GAMMA))?.0,
        file_name: cfg.pick(f.name, "name", "instance.bin".to_string())?,
    };
    if spec.m == 0 || spec.n == 0 {
        return usage("m and n must be positive");
    }
    if spec.file_name.contains(['/', '\\']) {
        return usage("name must be a plain file name");
    }
    Ok(spec)
}

//! The inexact gradient descent loop.
//!
//! At iterate `x^k` with error level `ε_k` the solver asks the oracle for
//! `g` with `‖g − ∇f(x^k)‖ ≤ θⁱε_k` for `i = 0, 1, …` and stops at the first
//! `i` with `‖g‖ > μθⁱε_k`. It then steps `x^{k+1} = x^k − g/L` and carries
//! the shrunken level `ε_{k+1} = θ^{i}ε_k` forward.

use std::time::{Duration, Instant};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::oracles::{GradientOracle, OracleError};
use crate::problem::SmoothProblem;
use crate::trace::{Budget, IterationRecord, IterationTrace, Status, StopReason};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub(crate) fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

pub const DEFAULT_I_MAX: u32 = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgdConfig {
    pub eps1: f64,
    pub theta: f64,
    pub mu: f64,
    pub lipschitz: f64,
    pub i_max: u32,
    pub max_outer: usize,
    /// Stop once `ε_{k+1}` falls to this level. Zero disables the test.
    pub eps_tol: f64,
    /// Stop once the accepted `‖g^k‖` falls to this level. Zero disables.
    pub grad_tol: f64,
    pub time_budget: Option<Duration>,
    /// Keep every iterate in the trace.
    pub record_iterates: bool,
}

impl IgdConfig {
    /// `ε₁ = 1`, `θ = 0.8`, the given `μ`, and loose budgets.
    pub fn preset(mu: f64, lipschitz: f64) -> Self {
        IgdConfig {
            eps1: 1.0,
            theta: 0.8,
            mu,
            lipschitz,
            i_max: DEFAULT_I_MAX,
            max_outer: 100_000,
            eps_tol: 1e-10,
            grad_tol: 0.0,
            time_budget: None,
            record_iterates: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("eps1", self.eps1)?;
        positive("lipschitz", self.lipschitz)?;
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(ConfigError::new(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.mu > 1.0 && self.mu.is_finite()) {
            return Err(ConfigError::new(format!("mu must exceed 1, got {}", self.mu)));
        }
        if self.i_max == 0 {
            return Err(ConfigError::new("i_max must be at least 1"));
        }
        if self.max_outer == 0 {
            return Err(ConfigError::new("max_outer must be at least 1"));
        }
        if !(self.eps_tol >= 0.0 && self.grad_tol >= 0.0) {
            return Err(ConfigError::new("tolerances must be nonnegative"));
        }
        if self.mu <= 2.0 {
            warn!("mu = {} <= 2: per-step descent is not guaranteed", self.mu);
        }
        Ok(())
    }

    /// `(1 − 2/μ)/(2L)`, the guaranteed decrease per unit `‖g‖²`.
    pub fn descent_constant(&self) -> f64 {
        (1.0 - 2.0 / self.mu) / (2.0 * self.lipschitz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InnerSearch {
    Accepted { g: Vec<f64>, i: u32 },
    /// Every level up to `i_max` was rejected; `bound` caps `‖∇f(x)‖`.
    Certificate { bound: f64 },
}

/// Error level `θⁱε` of the `i`-th shrink.
pub fn level(eps: f64, theta: f64, i: u32) -> f64 {
    eps * theta.powi(i as i32)
}

/// Step 1 of the loop: the smallest `i < i_max` whose answer passes
/// `‖g‖ > μθⁱε_k`, or a stationarity certificate
/// `‖∇f(x)‖ ≤ (μ + 1)θ^{i_max}ε_k`.
pub fn igd_inner_search<O: GradientOracle + ?Sized>(
    oracle: &mut O,
    x: &[f64],
    eps_k: f64,
    cfg: &IgdConfig,
) -> Result<InnerSearch, OracleError> {
    for i in 0..cfg.i_max {
        let lv = level(eps_k, cfg.theta, i);
        let g = oracle.query(x, lv)?;
        if linalg::norm(&g) > cfg.mu * lv {
            return Ok(InnerSearch::Accepted { g, i });
        }
    }
    Ok(InnerSearch::Certificate {
        bound: (cfg.mu + 1.0) * level(eps_k, cfg.theta, cfg.i_max),
    })
}

/// Largest `i_k` the inner search can return at a point with gradient norm
/// `grad_norm`.
pub fn ik_upper_bound(grad_norm: f64, eps_k: f64, theta: f64, mu: f64) -> u32 {
    let ratio = grad_norm / (eps_k * (mu + 1.0));
    if ratio > 1.0 {
        return 0;
    }
    (ratio.ln() / theta.ln() + 1.0).ceil() as u32
}

/// `x − g/L`.
pub fn igd_step(x: &[f64], g: &[f64], lipschitz: f64) -> Vec<f64> {
    x.iter().zip(g).map(|(xi, gi)| xi - gi / lipschitz).collect()
}

#[derive(Debug, Clone)]
pub struct IgdOutcome {
    pub x: Vec<f64>,
    pub trace: IterationTrace,
    pub status: Status,
    /// Final error level `ε` carried by the loop.
    pub eps: f64,
    pub oracle_cost: u64,
}

/// Runs the loop from `x0` until a tolerance, certificate, budget or oracle
/// failure ends it.
///
/// `problem` supplies the values written to the trace; the iteration itself
/// only sees the oracle. When the oracle reports a
/// [`step_target`](GradientOracle::step_target) that point is taken as
/// `x^{k+1}` in place of `x^k − g/L`.
pub fn igd_solve<P, O>(problem: &P, oracle: &mut O, x0: &[f64], cfg: &IgdConfig) -> Result<IgdOutcome, ConfigError>
where
    P: SmoothProblem + ?Sized,
    O: GradientOracle + ?Sized,
{
    cfg.validate()?;
    if x0.len() != problem.dim() {
        return Err(ConfigError::new(format!(
            "starting point has length {}, problem dimension is {}",
            x0.len(),
            problem.dim()
        )));
    }
    if linalg::ensure_finite(x0).is_err() {
        return Err(ConfigError::new("starting point is not finite"));
    }

    let start = Instant::now();
    let mut trace = IterationTrace::new("igd").with_eps_reduction(cfg.theta);
    trace.set_meta("problem", problem.name());
    trace.set_meta("mu", cfg.mu);
    trace.set_meta("theta", cfg.theta);
    trace.set_meta("eps1", cfg.eps1);
    trace.set_meta("L", cfg.lipschitz);
    trace.set_meta("i_max", cfg.i_max);

    let mut x = x0.to_vec();
    let mut eps = cfg.eps1;
    let mut f = problem.value(&x);
    let mut status = Status::BudgetExhausted(Budget::Outer);

    for k in 1..=cfg.max_outer {
        if !f.is_finite() {
            status = Status::OracleFailure(format!("non-finite objective value at k = {k}"));
            break;
        }
        if cfg.time_budget.is_some_and(|t| start.elapsed() >= t) {
            status = Status::BudgetExhausted(Budget::Time);
            break;
        }
        let cost_before = oracle.cost();
        let search = match igd_inner_search(oracle, &x, eps, cfg) {
            Ok(s) => s,
            Err(e) => {
                status = Status::OracleFailure(e.to_string());
                break;
            }
        };
        let (g, i) = match search {
            InnerSearch::Accepted { g, i } => (g, i),
            InnerSearch::Certificate { bound } => {
                status = Status::StationaryCertificate { bound };
                break;
            }
        };
        let g_norm = linalg::norm(&g);
        let rec = IterationRecord {
            k,
            f_val: f,
            grad_norm: g_norm,
            eps_k: eps,
            i_k: i,
            inner_iters: oracle.cost() - cost_before,
            elapsed: start.elapsed().as_secs_f64(),
            x: cfg.record_iterates.then(|| x.clone()),
        };
        trace.record(rec).expect("records are numbered consecutively");

        if g_norm <= cfg.grad_tol {
            // ‖∇f(x^k)‖ ≤ (1 + 1/μ)‖g^k‖ certifies x^k itself
            status = Status::Converged(StopReason::GradTol);
            break;
        }
        x = match oracle.step_target() {
            Some(p) => p.to_vec(),
            None => igd_step(&x, &g, cfg.lipschitz),
        };
        eps = level(eps, cfg.theta, i);
        f = problem.value(&x);
        if eps <= cfg.eps_tol {
            status = Status::Converged(StopReason::EpsTol);
            break;
        }
    }

    trace.set_meta("status", &status);
    trace.set_meta("f_final", f);
    trace.set_meta("x_norm_final", linalg::norm(&x));
    trace.set_meta("eps_final", eps);
    Ok(IgdOutcome {
        x,
        trace,
        status,
        eps,
        oracle_cost: oracle.cost(),
    })
}

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::alm::{
    gialm_solve, ialm_baseline_solve, AlmMonitor, EqualityConstrainedProblem, IalmConfig, SubproblemSolution,
    SubproblemSolver,
};
use crate::igd::{level, ConfigError, IgdConfig};
use crate::linalg::{self, LinearOperator};
use crate::oracles::OracleError;
use crate::prox::{ConvexProblem, GippmConfig};
use crate::trace::{IterationTrace, Status};

use super::{eta_residual, eta_with_residual, inner_solve_psi_from, project_linf_ball, LassoInstance, LassoOperator};

/// `h(y, z) = ½‖y‖² + δ_{γB∞}(z)` on `w = (y, z) ∈ ℝ^{m+n}`.
#[derive(Debug, Clone)]
pub struct LassoDualObjective {
    m: usize,
    n: usize,
    gamma: f64,
}

impl LassoDualObjective {
    pub fn new(m: usize, n: usize, gamma: f64) -> Self {
        LassoDualObjective { m, n, gamma }
    }
}

impl ConvexProblem for LassoDualObjective {
    fn dim(&self) -> usize {
        self.m + self.n
    }
    fn smooth_value(&self, w: &[f64]) -> f64 {
        0.5 * linalg::norm_sq(&w[..self.m])
    }
    fn smooth_gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = w.to_vec();
        g[self.m..].iter_mut().for_each(|v| *v = 0.0);
        g
    }
    fn smooth_lipschitz(&self) -> f64 {
        1.0
    }
    fn simple_value(&self, w: &[f64]) -> Option<f64> {
        w[self.m..].iter().all(|v| v.abs() <= self.gamma).then_some(0.0)
    }
    fn simple_prox(&self, _t: f64, u: &[f64]) -> Vec<f64> {
        let mut p = u[..self.m].to_vec();
        p.extend(project_linf_ball(&u[self.m..], self.gamma));
        p
    }
    fn exact_prox(&self, lambda: f64, x: &[f64]) -> Option<Vec<f64>> {
        let mut p = linalg::scale(&x[..self.m], 1.0 / (1.0 + lambda));
        p.extend(project_linf_ball(&x[self.m..], self.gamma));
        Some(p)
    }
    fn name(&self) -> String {
        "lasso_dual".into()
    }
}

/// `(y, z) ↦ −Aᵀy − z`, the dual constraint operator (`n × (m+n)`).
#[derive(Debug, Clone, Copy)]
pub struct DualConstraint<'a> {
    a: &'a LassoOperator,
}

impl<'a> DualConstraint<'a> {
    pub fn new(a: &'a LassoOperator) -> Self {
        DualConstraint { a }
    }
}

impl LinearOperator for DualConstraint<'_> {
    fn rows(&self) -> usize {
        self.a.cols()
    }
    fn cols(&self) -> usize {
        self.a.rows() + self.a.cols()
    }
    fn apply_into(&self, w: &[f64], out: &mut [f64]) {
        let m = self.a.rows();
        self.a.apply_adjoint_into(&w[..m], out);
        for (o, z) in out.iter_mut().zip(&w[m..]) {
            *o = -*o - z;
        }
    }
    fn apply_adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        let m = self.a.rows();
        self.a.apply_into(v, &mut out[..m]);
        out[..m].iter_mut().for_each(|o| *o = -*o);
        for (o, vi) in out[m..].iter_mut().zip(v) {
            *o = -vi;
        }
    }
}

impl LassoInstance {
    /// The dual program `min ½‖y‖² + δ(z) s.t. −Aᵀy − z = −c` in generic form.
    pub fn dual_problem(&self) -> EqualityConstrainedProblem<LassoDualObjective, DualConstraint<'_>> {
        EqualityConstrainedProblem::new(
            LassoDualObjective::new(self.m(), self.n(), self.gamma),
            DualConstraint::new(&self.a),
            self.c.iter().map(|v| -v).collect(),
        )
        .expect("dimensions agree by construction")
    }
}

/// Subproblem solver for the dual program: gradient descent on `ψ_k`,
/// warm-started from the previous `y`. A gap target `t` becomes the gradient
/// tolerance `ω = √(2t)`.
pub struct PsiSolver<'a> {
    inst: &'a LassoInstance,
    lambda: f64,
    warm: Vec<f64>,
    /// `Aᵀ·warm`.
    warm_aty: Option<Vec<f64>>,
    budget: u64,
}

impl<'a> PsiSolver<'a> {
    pub fn new(inst: &'a LassoInstance, lambda: f64, budget: u64) -> Self {
        PsiSolver {
            inst,
            lambda,
            warm: vec![0.0; inst.m()],
            warm_aty: None,
            budget,
        }
    }
}

impl SubproblemSolver for PsiSolver<'_> {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn solve(&mut self, multiplier: &[f64], gap_target: f64) -> Result<SubproblemSolution, OracleError> {
        let omega = (2.0 * gap_target).sqrt();
        let s = inner_solve_psi_from(
            multiplier,
            self.lambda,
            self.inst,
            omega,
            &self.warm,
            self.warm_aty.take(),
            self.budget,
        )?;
        // −Aᵀy − z + c
        let residual = s
            .aty
            .iter()
            .zip(&s.z)
            .zip(&self.inst.c)
            .map(|((a, z), c)| c - a - z)
            .collect();
        self.warm.clone_from(&s.y);
        self.warm_aty = Some(s.aty);
        let mut w = s.y;
        w.extend(s.z);
        Ok(SubproblemSolution {
            x: w,
            gap_bound: 0.5 * s.grad_norm * s.grad_norm,
            inner_iters: s.iterations,
            residual: Some(residual),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LassoMethod {
    Gialm { mu: f64 },
    Ialm { q: f64 },
}

impl LassoMethod {
    pub const PRESETS: [LassoMethod; 4] = [
        LassoMethod::Gialm { mu: 1.1 },
        LassoMethod::Gialm { mu: 3.0 },
        LassoMethod::Ialm { q: 1.5 },
        LassoMethod::Ialm { q: 2.0 },
    ];

    /// `GIALM-<μ>` or `IALM-<q>`, case-insensitive.
    pub fn parse(s: &str) -> Option<Self> {
        let upper = s.to_ascii_uppercase();
        if let Some(v) = upper.strip_prefix("GIALM-") {
            v.parse().ok().map(|mu| LassoMethod::Gialm { mu })
        } else if let Some(v) = upper.strip_prefix("IALM-") {
            v.parse().ok().map(|q| LassoMethod::Ialm { q })
        } else {
            None
        }
    }

    pub fn label(&self) -> String {
        match self {
            LassoMethod::Gialm { mu } => format!("GIALM-{mu}"),
            LassoMethod::Ialm { q } => format!("IALM-{q}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LassoOptions {
    /// Overrides the instance's proximal parameter.
    pub lambda: Option<f64>,
    pub eta_tol: f64,
    pub max_outer: usize,
    pub time_budget: Option<Duration>,
    /// Gradient steps allowed per subproblem solve.
    pub max_inner: u64,
    pub eps1: f64,
    pub theta: f64,
    /// Starting multiplier; zero when absent.
    pub x0: Option<Vec<f64>>,
    pub record_iterates: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            lambda: None,
            eta_tol: 1e-6,
            max_outer: 200_000,
            time_budget: None,
            max_inner: 10_000_000,
            eps1: 1.0,
            theta: 0.8,
            x0: None,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub k: usize,
    pub eta: f64,
    pub omega: f64,
}

/// One row of the per-run summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSummary {
    pub method: String,
    pub m: usize,
    pub n: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub iters: usize,
    pub total_inner_iters: u64,
    pub eta_final: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone)]
pub struct LassoRun {
    pub x: Vec<f64>,
    pub trace: IterationTrace,
    pub status: Status,
    /// `η` at `x^{k+1}` and the inner tolerance used at step `k`.
    pub residuals: Vec<ResidualRow>,
    /// Lasso objective at `x^{k+1}`.
    pub primal_values: Vec<f64>,
    /// Cumulative inner iterations after step `k`.
    pub cumulative_inner: Vec<u64>,
    pub summary: LassoSummary,
}

struct EtaMonitor<'a> {
    inst: &'a LassoInstance,
    tol: f64,
    etas: Vec<f64>,
    primal: Vec<f64>,
}

impl AlmMonitor for EtaMonitor<'_> {
    fn converged(&mut self, _k: usize, multiplier: &[f64], _primal: &[f64]) -> bool {
        let r = linalg::sub(&self.inst.a.apply(multiplier), &self.inst.b);
        let eta = eta_with_residual(multiplier, &r, self.inst);
        self.etas.push(eta);
        self.primal
            .push(0.5 * linalg::norm_sq(&r) + self.inst.gamma * linalg::norm_l1(multiplier));
        eta <= self.tol
    }
}

/// Solves the Lasso through its dual with GIALM or IALM, stopping at
/// `η ≤ eta_tol`, the outer cap or the time budget.
pub fn gialm_lasso_solve(inst: &LassoInstance, method: LassoMethod, opts: &LassoOptions) -> Result<LassoRun, ConfigError> {
    let lambda = opts.lambda.unwrap_or(inst.lambda);
    let x0 = opts.x0.clone().unwrap_or_else(|| vec![0.0; inst.n()]);
    let prob = inst.dual_problem();
    let mut sub = PsiSolver::new(inst, lambda, opts.max_inner);
    let mut monitor = EtaMonitor {
        inst,
        tol: opts.eta_tol,
        etas: Vec::new(),
        primal: Vec::new(),
    };
    let start = Instant::now();
    let out = match method {
        LassoMethod::Gialm { mu } => {
            let igd = IgdConfig {
                eps1: opts.eps1,
                theta: opts.theta,
                mu,
                lipschitz: 1.0 / lambda,
                max_outer: opts.max_outer,
                eps_tol: 0.0,
                grad_tol: 0.0,
                time_budget: opts.time_budget,
                record_iterates: opts.record_iterates,
                ..IgdConfig::preset(mu, 1.0 / lambda)
            };
            gialm_solve(&prob, &mut sub, &mut monitor, &x0, &GippmConfig::new(lambda, igd))?
        }
        LassoMethod::Ialm { q } => {
            let cfg = IalmConfig {
                max_outer: opts.max_outer,
                time_budget: opts.time_budget,
                record_iterates: opts.record_iterates,
                ..IalmConfig::new(lambda, q)?
            };
            ialm_baseline_solve(&prob, &mut sub, &mut monitor, &x0, &cfg)?
        }
    };
    let time_s = start.elapsed().as_secs_f64();

    let sqrt_lambda = lambda.sqrt();
    let theta = opts.theta;
    let residuals = out
        .trace
        .records()
        .iter()
        .zip(&monitor.etas)
        .map(|(r, &eta)| ResidualRow {
            k: r.k,
            eta,
            omega: match method {
                LassoMethod::Gialm { .. } => sqrt_lambda * level(r.eps_k, theta, r.i_k),
                LassoMethod::Ialm { .. } => r.eps_k,
            },
        })
        .collect();
    let mut acc = 0;
    let cumulative_inner = out
        .trace
        .records()
        .iter()
        .map(|r| {
            acc += r.inner_iters;
            acc
        })
        .collect();
    let eta_final = monitor.etas.last().copied().unwrap_or_else(|| eta_residual(&x0, inst));
    let mut trace = out.trace;
    trace.method = method.label();
    trace.set_meta("gamma", inst.gamma);
    trace.set_meta("eta_final", eta_final);
    let summary = LassoSummary {
        method: method.label(),
        m: inst.m(),
        n: inst.n(),
        gamma: inst.gamma,
        lambda,
        iters: trace.len(),
        total_inner_iters: out.total_inner,
        eta_final,
        time_s,
    };
    Ok(LassoRun {
        x: out.y,
        trace,
        status: out.status,
        residuals,
        primal_values: monitor.primal,
        cumulative_inner,
        summary,
    })
}

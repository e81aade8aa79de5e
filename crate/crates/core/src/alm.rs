//! Augmented Lagrangian methods for `min h(x) s.t. Ax = b`.
//!
//! With `ℓ(x, y) = h(x) + ⟨y, Ax − b⟩` and
//! `L_λ(x, y) = ℓ(x, y) + (λ/2)‖Ax − b‖²`, the multiplier iteration
//! `y ← y + λ(Ax − b)` is a proximal point step on `g = −d`, the negated
//! dual function, because `y + λ(Ax − b)` approximates `Prox_{λg}(y)`
//! whenever `x` nearly minimises `L_λ(·, y)`. [`gialm_solve`] runs the
//! adaptive-error version of this step, [`ialm_baseline_solve`] the classical
//! one with summable errors.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::igd::{level, ConfigError};
use crate::linalg::{self, LinearOperator};
use crate::oracles::OracleError;
use crate::prox::{ConvexProblem, GippmConfig, ProxOracle};
use crate::trace::{Budget, IterationRecord, IterationTrace, Status, StopReason};

/// `min h(x)` subject to `Ax = b`.
pub struct EqualityConstrainedProblem<H, A> {
    pub h: H,
    pub a: A,
    pub b: Vec<f64>,
}

impl<H: ConvexProblem, A: LinearOperator> EqualityConstrainedProblem<H, A> {
    pub fn new(h: H, a: A, b: Vec<f64>) -> Result<Self, ConfigError> {
        if a.cols() != h.dim() || a.rows() != b.len() {
            return Err(ConfigError::new(format!(
                "A is {}x{}, h has dimension {} and b length {}",
                a.rows(),
                a.cols(),
                h.dim(),
                b.len()
            )));
        }
        Ok(EqualityConstrainedProblem { h, a, b })
    }

    /// `Ax − b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.apply(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }

    /// `ℓ(x, y)`, or `None` when `h(x) = +∞`.
    pub fn lagrangian(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let r = self.residual(x);
        self.h.value(x).map(|hv| hv + linalg::dot(y, &r))
    }
}

/// `L_λ(x, y) = h(x) + ⟨y, Ax − b⟩ + (λ/2)‖Ax − b‖²`; `None` when `h(x) = +∞`.
pub fn aug_lagrangian_value<H: ConvexProblem, A: LinearOperator>(
    prob: &EqualityConstrainedProblem<H, A>,
    lambda: f64,
    x: &[f64],
    y: &[f64],
) -> Option<f64> {
    aug_lagrangian_from_residual(prob, lambda, x, y, &prob.residual(x))
}

/// [`aug_lagrangian_value`] with `r = Ax − b` already known.
fn aug_lagrangian_from_residual<H: ConvexProblem, A: LinearOperator>(
    prob: &EqualityConstrainedProblem<H, A>,
    lambda: f64,
    x: &[f64],
    y: &[f64],
    r: &[f64],
) -> Option<f64> {
    prob.h
        .value(x)
        .map(|hv| hv + linalg::dot(y, r) + 0.5 * lambda * linalg::norm_sq(r))
}

/// `‖y + λ(Ax − b) − Prox_{λg}(y)‖²/(2λ)`, a lower bound on the subproblem gap
/// `L_λ(x, y) − inf_z L_λ(z, y)`.
pub fn dual_prox_gap_lower_bound<H: ConvexProblem, A: LinearOperator>(
    prob: &EqualityConstrainedProblem<H, A>,
    lambda: f64,
    x: &[f64],
    y: &[f64],
    prox_of_dual: &[f64],
) -> f64 {
    let p = multiplier_update(y, &prob.residual(x), lambda);
    linalg::dist(&p, prox_of_dual).powi(2) / (2.0 * lambda)
}

/// `y + λr`.
pub fn multiplier_update(y: &[f64], r: &[f64], lambda: f64) -> Vec<f64> {
    y.iter().zip(r).map(|(yi, ri)| yi + lambda * ri).collect()
}

/// Gap target `λℓ²/2` that makes `y + λ(Ax − b)` a prox estimate with
/// error at most `λℓ`.
pub fn gap_target(lambda: f64, lv: f64) -> f64 {
    0.5 * lambda * lv * lv
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub x: Vec<f64>,
    /// Certified upper bound on `L_λ(x, y) − inf_z L_λ(z, y)`.
    pub gap_bound: f64,
    pub inner_iters: u64,
    /// `Ax − b`, when the solver has it for free.
    pub residual: Option<Vec<f64>>,
}

impl SubproblemSolution {
    fn take_residual<H: ConvexProblem, A: LinearOperator>(&mut self, prob: &EqualityConstrainedProblem<H, A>) -> Vec<f64> {
        self.residual.take().unwrap_or_else(|| prob.residual(&self.x))
    }
}

/// Approximate minimiser of `L_λ(·, y)` for a fixed `λ`.
pub trait SubproblemSolver {
    fn lambda(&self) -> f64;

    fn solve(&mut self, multiplier: &[f64], gap_target: f64) -> Result<SubproblemSolution, OracleError>;
}

impl<T: SubproblemSolver + ?Sized> SubproblemSolver for &mut T {
    fn lambda(&self) -> f64 {
        (**self).lambda()
    }
    fn solve(&mut self, multiplier: &[f64], gap_target: f64) -> Result<SubproblemSolution, OracleError> {
        (**self).solve(multiplier, gap_target)
    }
}

/// Per-iteration hooks for problem-specific stopping rules and trace values.
pub trait AlmMonitor {
    /// Called with the new multiplier after every outer step.
    fn converged(&mut self, _k: usize, _multiplier: &[f64], _primal: &[f64]) -> bool {
        false
    }

    /// Value written as `f_val` for the multiplier `y^k`. The default
    /// `−L_λ(x^{k+1}, y^k)` underestimates `e_λg(y^k)` by at most the
    /// subproblem gap.
    fn objective(&mut self, _multiplier: &[f64]) -> Option<f64> {
        None
    }
}

/// Monitor with no stopping rule and default trace values.
pub struct NoMonitor;

impl AlmMonitor for NoMonitor {}

#[derive(Debug, Clone)]
pub struct AlmOutcome {
    /// Last primal subproblem solution.
    pub x: Vec<f64>,
    /// Final multiplier.
    pub y: Vec<f64>,
    pub trace: IterationTrace,
    pub status: Status,
    pub total_inner: u64,
}

fn check_dims<H: ConvexProblem, A: LinearOperator, S: SubproblemSolver + ?Sized>(
    prob: &EqualityConstrainedProblem<H, A>,
    sub: &S,
    lambda: f64,
    y0: &[f64],
) -> Result<(), ConfigError> {
    if y0.len() != prob.b.len() {
        return Err(ConfigError::new(format!(
            "multiplier has length {}, constraint count is {}",
            y0.len(),
            prob.b.len()
        )));
    }
    if (sub.lambda() - lambda).abs() > 1e-15 * lambda {
        return Err(ConfigError::new(format!(
            "subproblem solver uses lambda {}, configuration {}",
            sub.lambda(),
            lambda
        )));
    }
    Ok(())
}

/// Adaptive-error inexact augmented Lagrangian method.
///
/// For `i = 0, 1, …` the subproblem at `y^k` is solved to gap
/// `λθ^{2i}ε_k²/2` until `‖Ax − b‖ > μθⁱε_k`; then `y^{k+1} = y^k + λ(Ax − b)`
/// and `ε_{k+1} = θ^{i}ε_k`. The trace's `grad_norm` column holds
/// `‖Ax^{k+1} − b‖`; iterates, when recorded, are multipliers.
pub fn gialm_solve<H, A, S, M>(
    prob: &EqualityConstrainedProblem<H, A>,
    sub: &mut S,
    monitor: &mut M,
    y0: &[f64],
    cfg: &GippmConfig,
) -> Result<AlmOutcome, ConfigError>
where
    H: ConvexProblem,
    A: LinearOperator,
    S: SubproblemSolver + ?Sized,
    M: AlmMonitor + ?Sized,
{
    cfg.validate()?;
    check_dims(prob, sub, cfg.lambda, y0)?;
    let c = &cfg.igd;
    let lambda = cfg.lambda;
    let start = Instant::now();
    let mut trace = IterationTrace::new("gialm").with_eps_reduction(c.theta);
    trace.set_meta("lambda", lambda);
    trace.set_meta("mu", c.mu);
    trace.set_meta("theta", c.theta);
    trace.set_meta("eps1", c.eps1);

    let mut y = y0.to_vec();
    let mut x = Vec::new();
    let mut eps = c.eps1;
    let mut total_inner = 0u64;
    let mut status = Status::BudgetExhausted(Budget::Outer);

    'outer: for k in 1..=c.max_outer {
        if c.time_budget.is_some_and(|t| start.elapsed() >= t) {
            status = Status::BudgetExhausted(Budget::Time);
            break;
        }
        let mut inner = 0u64;
        let mut accepted = None;
        for i in 0..c.i_max {
            let lv = level(eps, c.theta, i);
            let mut sol = match sub.solve(&y, gap_target(lambda, lv)) {
                Ok(s) => s,
                Err(e) => {
                    if let OracleError::InnerBudget { iterations, .. } = &e {
                        total_inner += iterations;
                    }
                    status = Status::OracleFailure(e.to_string());
                    break 'outer;
                }
            };
            inner += sol.inner_iters;
            let r = sol.take_residual(prob);
            if linalg::norm(&r) > c.mu * lv {
                accepted = Some((sol.x, r, i));
                break;
            }
            x = sol.x;
        }
        total_inner += inner;
        let Some((x_new, r, i)) = accepted else {
            // ‖y − Prox_{λg}(y)‖/λ ≤ (1 + μ)θ^{i_max}ε_k
            status = Status::StationaryCertificate {
                bound: (c.mu + 1.0) * level(eps, c.theta, c.i_max),
            };
            break;
        };
        let f = match monitor.objective(&y) {
            Some(v) => v,
            None => aug_lagrangian_from_residual(prob, lambda, &x_new, &y, &r).map_or(f64::NAN, |v| -v),
        };
        let r_norm = linalg::norm(&r);
        trace
            .record(IterationRecord {
                k,
                f_val: f,
                grad_norm: r_norm,
                eps_k: eps,
                i_k: i,
                inner_iters: inner,
                elapsed: start.elapsed().as_secs_f64(),
                x: c.record_iterates.then(|| y.clone()),
            })
            .expect("records are numbered consecutively");
        x = x_new;
        if r_norm <= c.grad_tol {
            status = Status::Converged(StopReason::GradTol);
            break;
        }
        y = multiplier_update(&y, &r, lambda);
        eps = level(eps, c.theta, i);
        if monitor.converged(k, &y, &x) {
            status = Status::Converged(StopReason::Residual);
            break;
        }
        if eps <= c.eps_tol {
            status = Status::Converged(StopReason::EpsTol);
            break;
        }
    }

    trace.set_meta("status", &status);
    trace.set_meta("y_norm_final", linalg::norm(&y));
    Ok(AlmOutcome {
        x,
        y,
        trace,
        status,
        total_inner,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IalmConfig {
    pub lambda: f64,
    /// `ω_k = k^{−q}`.
    pub q: f64,
    pub max_outer: usize,
    /// Stop once `‖Ax^{k+1} − b‖` falls to this level. Zero disables.
    pub grad_tol: f64,
    pub time_budget: Option<Duration>,
    pub record_iterates: bool,
}

impl IalmConfig {
    pub fn new(lambda: f64, q: f64) -> Result<Self, ConfigError> {
        let cfg = IalmConfig {
            lambda,
            q,
            max_outer: 100_000,
            grad_tol: 0.0,
            time_budget: None,
            record_iterates: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ConfigError::new(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.q > 1.0 && self.q.is_finite()) {
            return Err(ConfigError::new(format!(
                "q must exceed 1 for summable errors, got {}",
                self.q
            )));
        }
        if self.max_outer == 0 {
            return Err(ConfigError::new("max_outer must be at least 1"));
        }
        Ok(())
    }

    pub fn omega(&self, k: usize) -> f64 {
        (k as f64).powf(-self.q)
    }
}

/// Classical inexact augmented Lagrangian method: the subproblem at step `k`
/// is solved to gap `δ_k²` with `δ_k = ω_k/√2`, i.e. to gap `ω_k²/2`.
///
/// Records carry `eps_k = ω_k` and `i_k = 0`.
pub fn ialm_baseline_solve<H, A, S, M>(
    prob: &EqualityConstrainedProblem<H, A>,
    sub: &mut S,
    monitor: &mut M,
    y0: &[f64],
    cfg: &IalmConfig,
) -> Result<AlmOutcome, ConfigError>
where
    H: ConvexProblem,
    A: LinearOperator,
    S: SubproblemSolver + ?Sized,
    M: AlmMonitor + ?Sized,
{
    cfg.validate()?;
    check_dims(prob, sub, cfg.lambda, y0)?;
    let lambda = cfg.lambda;
    let start = Instant::now();
    let mut trace = IterationTrace::new("ialm");
    trace.set_meta("lambda", lambda);
    trace.set_meta("q", cfg.q);

    let mut y = y0.to_vec();
    let mut x = Vec::new();
    let mut total_inner = 0u64;
    let mut status = Status::BudgetExhausted(Budget::Outer);

    for k in 1..=cfg.max_outer {
        if cfg.time_budget.is_some_and(|t| start.elapsed() >= t) {
            status = Status::BudgetExhausted(Budget::Time);
            break;
        }
        let omega = cfg.omega(k);
        let mut sol = match sub.solve(&y, 0.5 * omega * omega) {
            Ok(s) => s,
            Err(e) => {
                if let OracleError::InnerBudget { iterations, .. } = &e {
                    total_inner += iterations;
                }
                status = Status::OracleFailure(e.to_string());
                break;
            }
        };
        total_inner += sol.inner_iters;
        let r = sol.take_residual(prob);
        let f = match monitor.objective(&y) {
            Some(v) => v,
            None => aug_lagrangian_from_residual(prob, lambda, &sol.x, &y, &r).map_or(f64::NAN, |v| -v),
        };
        let r_norm = linalg::norm(&r);
        trace
            .record(IterationRecord {
                k,
                f_val: f,
                grad_norm: r_norm,
                eps_k: omega,
                i_k: 0,
                inner_iters: sol.inner_iters,
                elapsed: start.elapsed().as_secs_f64(),
                x: cfg.record_iterates.then(|| y.clone()),
            })
            .expect("records are numbered consecutively");
        x = sol.x;
        if r_norm <= cfg.grad_tol {
            status = Status::Converged(StopReason::GradTol);
            break;
        }
        y = multiplier_update(&y, &r, lambda);
        if monitor.converged(k, &y, &x) {
            status = Status::Converged(StopReason::Residual);
            break;
        }
    }

    trace.set_meta("status", &status);
    trace.set_meta("y_norm_final", linalg::norm(&y));
    Ok(AlmOutcome {
        x,
        y,
        trace,
        status,
        total_inner,
    })
}

/// Prox oracle for `g = −d` induced by a subproblem solver: answers
/// `p = y + λ(Ax − b)` with `x` solved to gap `λε²/2`, which places `p` within
/// `λε` of `Prox_{λg}(y)`.
///
/// Feeding this oracle to [`gippm_solve`](crate::prox::gippm_solve)
/// reproduces the multiplier sequence of [`gialm_solve`].
pub struct InducedProxOracle<'a, H, A, S> {
    prob: &'a EqualityConstrainedProblem<H, A>,
    sub: S,
    cost: u64,
}

impl<'a, H, A, S: SubproblemSolver> InducedProxOracle<'a, H, A, S> {
    pub fn new(prob: &'a EqualityConstrainedProblem<H, A>, sub: S) -> Self {
        InducedProxOracle { prob, sub, cost: 0 }
    }
}

impl<H: ConvexProblem, A: LinearOperator, S: SubproblemSolver> ProxOracle for InducedProxOracle<'_, H, A, S> {
    fn lambda(&self) -> f64 {
        self.sub.lambda()
    }

    fn prox(&mut self, y: &[f64], eps_level: f64) -> Result<Vec<f64>, OracleError> {
        let lambda = self.sub.lambda();
        let sol = self.sub.solve(y, gap_target(lambda, eps_level));
        let mut sol = match sol {
            Ok(s) => s,
            Err(e) => {
                if let OracleError::InnerBudget { iterations, .. } = &e {
                    self.cost += iterations;
                }
                return Err(e);
            }
        };
        self.cost += sol.inner_iters;
        let r = sol.take_residual(self.prob);
        Ok(multiplier_update(y, &r, lambda))
    }

    fn cost(&self) -> u64 {
        self.cost
    }
}

/// Closed-form subproblem solver for `h = ½‖x‖²` with a dense `A`:
/// `argmin_x L_λ(x, y)` solves `(I + λAᵀA)x = λAᵀb − Aᵀy`. The returned
/// point is exact up to rounding, so its gap bound is zero.
pub struct QuadraticSubproblem<'a> {
    a: &'a linalg::DenseMatrix,
    b: &'a [f64],
    lambda: f64,
    system: Vec<f64>,
}

impl<'a> QuadraticSubproblem<'a> {
    pub fn new(a: &'a linalg::DenseMatrix, b: &'a [f64], lambda: f64) -> Self {
        let n = a.ncols();
        let gram = a.gram();
        let mut system = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                system[i * n + j] = lambda * gram.get(i, j) + if i == j { 1.0 } else { 0.0 };
            }
        }
        QuadraticSubproblem { a, b, lambda, system }
    }
}

/// Solves the symmetric positive definite system `m x = rhs` (row-major, `n×n`)
/// by Cholesky factorisation.
fn cholesky_solve(m: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = if i == j { s.sqrt() } else { s / l[j * n + j] };
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

impl SubproblemSolver for QuadraticSubproblem<'_> {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn solve(&mut self, multiplier: &[f64], _gap_target: f64) -> Result<SubproblemSolution, OracleError> {
        let atb = self.a.apply_adjoint(self.b);
        let aty = self.a.apply_adjoint(multiplier);
        let rhs: Vec<f64> = atb.iter().zip(&aty).map(|(u, v)| self.lambda * u - v).collect();
        let x = cholesky_solve(&self.system, self.a.ncols(), &rhs);
        linalg::ensure_finite(&x).map_err(|_| OracleError::NonFinite)?;
        Ok(SubproblemSolution {
            x,
            gap_bound: 0.0,
            inner_iters: 1,
            residual: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::igd::IgdConfig;
    use crate::linalg::DenseMatrix;
    use crate::prox::{gippm_solve, SquaredNorm, Zero};
    use crate::rng::SeededRng;

    fn identity_problem(n: usize) -> EqualityConstrainedProblem<SquaredNorm, DenseMatrix> {
        EqualityConstrainedProblem::new(SquaredNorm::new(n), DenseMatrix::identity(n), vec![0.0; n]).unwrap()
    }

    #[test]
    fn lagrangian_examples() {
        let prob = EqualityConstrainedProblem::new(Zero::new(2), DenseMatrix::identity(2), vec![0.0; 2]).unwrap();
        let (x, y) = ([1.0, -2.0], [0.5, 3.0]);
        let v = aug_lagrangian_value(&prob, 2.0, &x, &y).unwrap();
        assert!((v - (linalg::dot(&y, &x) + linalg::norm_sq(&x))).abs() < 1e-14);

        let prob = EqualityConstrainedProblem::new(SquaredNorm::new(2), DenseMatrix::identity(2), vec![1.0, 2.0]).unwrap();
        let feasible = [1.0, 2.0];
        for lambda in [0.1, 3.0] {
            let v = aug_lagrangian_value(&prob, lambda, &feasible, &y).unwrap();
            assert_eq!(v, 2.5);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(EqualityConstrainedProblem::new(Zero::new(3), DenseMatrix::identity(2), vec![0.0; 2]).is_err());
    }

    #[test]
    fn gialm_closed_form_dual() {
        let prob = identity_problem(3);
        let mut sub = QuadraticSubproblem::new(&prob.a, &prob.b, 1.0);
        let cfg = GippmConfig::new(
            1.0,
            IgdConfig {
                eps_tol: 1e-8,
                ..IgdConfig::preset(3.0, 1.0)
            },
        );
        let out = gialm_solve(&prob, &mut sub, &mut NoMonitor, &[1.0, -2.0, 0.5], &cfg).unwrap();
        assert!(out.status.is_success(), "{}", out.status);
        assert!(linalg::norm(&out.y) <= 1e-6);
        assert!(linalg::norm(&prob.residual(&out.x)) <= 1e-6);
        let recs = out.trace.records();
        for w in recs.windows(2) {
            // accepted residual exceeds μ·ε_{k+1}
            assert!(w[0].grad_norm > 3.0 * w[1].eps_k);
        }
    }

    #[test]
    fn ialm_rejects_non_summable_schedule() {
        assert!(IalmConfig::new(1.0, 1.0).is_err());
        let cfg = IalmConfig::new(1.0, 2.0).unwrap();
        assert_eq!(cfg.omega(1), 1.0);
        assert_eq!(cfg.omega(2), 0.25);
        assert!((cfg.omega(3) - 1.0 / 9.0).abs() < 1e-16);
    }

    #[test]
    fn gialm_matches_gippm_on_induced_oracle() {
        let mut rng = SeededRng::new(5);
        let a = DenseMatrix::gaussian(4, 6, &mut rng);
        let b = rng.gaussian_vec(4);
        let prob = EqualityConstrainedProblem::new(SquaredNorm::new(6), a, b).unwrap();
        let lambda = 0.7;
        let mut igd = IgdConfig::preset(3.0, 1.0 / lambda);
        igd.eps_tol = 1e-9;
        igd.record_iterates = true;
        let cfg = GippmConfig::new(lambda, igd);
        let y0 = vec![0.0; 4];

        let mut sub = QuadraticSubproblem::new(&prob.a, &prob.b, lambda);
        let alm = gialm_solve(&prob, &mut sub, &mut NoMonitor, &y0, &cfg).unwrap();

        // −d(y) = ½‖Aᵀy‖² + ⟨b, y⟩ is smooth; its envelope values only feed the trace
        let g = SquaredNorm::new(4);
        let oracle = InducedProxOracle::new(&prob, QuadraticSubproblem::new(&prob.a, &prob.b, lambda));
        let pp = gippm_solve(&g, oracle, &y0, &cfg).unwrap();

        assert_eq!(alm.trace.len(), pp.trace.len());
        for (r1, r2) in alm.trace.records().iter().zip(pp.trace.records()) {
            assert_eq!(r1.x, r2.x);
            assert_eq!(r1.i_k, r2.i_k);
        }
        assert_eq!(alm.y, pp.x);
    }
}

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::igd::ConfigError;
use crate::linalg;
use crate::problem::SmoothProblem;
use crate::trace::{Budget, IterationRecord, IterationTrace, Status, StopReason};

use super::gippm::MoreauEnvelope;
use super::{ConvexProblem, ProxOracle};

/// Error test of the classical inexact proximal point method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IppmScheme {
    /// `‖p^k − Prox(x^k)‖ ≤ δ_k`.
    A,
    /// `‖p^k − Prox(x^k)‖ ≤ δ_k‖x^k − p^k‖`.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IppmConfig {
    pub lambda: f64,
    pub scheme: IppmScheme,
    /// `δ_k = c·k^{−p_exp}`.
    pub c: f64,
    pub p_exp: f64,
    pub max_outer: usize,
    /// Stop once the certified bound on `‖∇e_λg(x^k)‖` is at most this.
    pub grad_tol: f64,
    pub time_budget: Option<Duration>,
    /// Cap on the halvings used to meet the relative test of scheme B.
    pub max_refine: u32,
    pub record_iterates: bool,
}

impl IppmConfig {
    pub fn new(lambda: f64, scheme: IppmScheme, c: f64, p_exp: f64) -> Result<Self, ConfigError> {
        let cfg = IppmConfig {
            lambda,
            scheme,
            c,
            p_exp,
            max_outer: 100_000,
            grad_tol: 1e-8,
            time_budget: None,
            max_refine: 60,
            record_iterates: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.lambda > 0.0 && self.c > 0.0) {
            return Err(ConfigError::new("lambda and c must be positive"));
        }
        if !(self.p_exp > 1.0) {
            return Err(ConfigError::new(format!(
                "p_exp must exceed 1 for summable errors, got {}",
                self.p_exp
            )));
        }
        if self.max_outer == 0 || self.max_refine == 0 {
            return Err(ConfigError::new("budgets must be at least 1"));
        }
        Ok(())
    }

    pub fn delta(&self, k: usize) -> f64 {
        self.c * (k as f64).powf(-self.p_exp)
    }
}

#[derive(Debug, Clone)]
pub struct IppmOutcome {
    pub x: Vec<f64>,
    pub trace: IterationTrace,
    pub status: Status,
    pub oracle_cost: u64,
}

/// Classical inexact proximal point iteration `x^{k+1} = p^k` with
/// summable errors.
///
/// Records use the same columns as the IGD family: `f_val` is `e_λg(x^k)`,
/// `grad_norm` is `‖x^k − p^k‖/λ`, `eps_k` is `δ_k` and `i_k` counts the
/// refinements scheme B needed.
pub fn ippm_baseline_solve<G, O>(problem: &G, mut prox: O, x0: &[f64], cfg: &IppmConfig) -> Result<IppmOutcome, ConfigError>
where
    G: ConvexProblem + ?Sized,
    O: ProxOracle,
{
    cfg.validate()?;
    if x0.len() != problem.dim() {
        return Err(ConfigError::new("starting point has the wrong dimension"));
    }
    let lambda = cfg.lambda;
    let envelope = MoreauEnvelope::new(problem, lambda);
    let start = Instant::now();
    let name = match cfg.scheme {
        IppmScheme::A => "ippm_a",
        IppmScheme::B => "ippm_b",
    };
    let mut trace = IterationTrace::new(name);
    trace.set_meta("lambda", lambda);
    trace.set_meta("c", cfg.c);
    trace.set_meta("p", cfg.p_exp);

    let mut x = x0.to_vec();
    let mut status = Status::BudgetExhausted(Budget::Outer);

    'outer: for k in 1..=cfg.max_outer {
        if cfg.time_budget.is_some_and(|t| start.elapsed() >= t) {
            status = Status::BudgetExhausted(Budget::Time);
            break;
        }
        let cost_before = prox.cost();
        let delta = cfg.delta(k);
        // ProxOracle levels are in gradient units: ‖p − Prox‖ ≤ λ·level
        let mut lv = delta / lambda;
        let mut p = match prox.prox(&x, lv) {
            Ok(p) => p,
            Err(e) => {
                status = Status::OracleFailure(e.to_string());
                break;
            }
        };
        let mut refinements = 0;
        if cfg.scheme == IppmScheme::B {
            loop {
                let step = linalg::dist(&x, &p);
                if lambda * lv <= delta * step {
                    break;
                }
                if refinements == cfg.max_refine {
                    // ‖x − Prox‖ ≤ ‖x − p‖ + λ·level
                    status = Status::StationaryCertificate {
                        bound: (step + lambda * lv) / lambda,
                    };
                    break 'outer;
                }
                refinements += 1;
                lv = if step > 0.0 { (delta * step / lambda).min(0.5 * lv) } else { 0.5 * lv };
                p = match prox.prox(&x, lv) {
                    Ok(p) => p,
                    Err(e) => {
                        status = Status::OracleFailure(e.to_string());
                        break 'outer;
                    }
                };
            }
        }
        let step = linalg::dist(&x, &p);
        let f = envelope.value(&x);
        if !f.is_finite() {
            status = Status::OracleFailure(format!("non-finite envelope value at k = {k}"));
            break;
        }
        trace
            .record(IterationRecord {
                k,
                f_val: f,
                grad_norm: step / lambda,
                eps_k: delta,
                i_k: refinements,
                inner_iters: prox.cost() - cost_before,
                elapsed: start.elapsed().as_secs_f64(),
                x: cfg.record_iterates.then(|| x.clone()),
            })
            .expect("records are numbered consecutively");
        if (step + lambda * lv) / lambda <= cfg.grad_tol {
            status = Status::Converged(StopReason::GradTol);
            break;
        }
        x = p;
    }

    trace.set_meta("status", &status);
    trace.set_meta("x_norm_final", linalg::norm(&x));
    Ok(IppmOutcome {
        x,
        trace,
        status,
        oracle_cost: prox.cost(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::{InnerProx, SquaredNorm};

    #[test]
    fn delta_schedule() {
        let cfg = IppmConfig::new(1.0, IppmScheme::A, 1.0, 1.5).unwrap();
        assert_eq!(cfg.delta(1), 1.0);
        assert!((cfg.delta(2) - 0.353_553_390_593_273_8).abs() < 1e-15);
        assert!((cfg.delta(3) - 0.192_450_089_729_875_3).abs() < 1e-15);
    }

    #[test]
    fn non_summable_rejected() {
        assert!(IppmConfig::new(1.0, IppmScheme::A, 1.0, 1.0).is_err());
        assert!(IppmConfig::new(1.0, IppmScheme::B, 1.0, 0.5).is_err());
    }

    #[test]
    fn both_schemes_converge_on_squared_norm() {
        let g = SquaredNorm::new(3);
        for scheme in [IppmScheme::A, IppmScheme::B] {
            let cfg = IppmConfig::new(1.0, scheme, 1.0, 2.0).unwrap();
            let out = ippm_baseline_solve(&g, InnerProx::new(&g, 1.0).inner_only(), &[1.0, 2.0, -1.0], &cfg).unwrap();
            assert!(out.status.is_success(), "{scheme:?}: {}", out.status);
            assert!(linalg::norm(&out.x) <= 1e-6, "{scheme:?}");
        }
    }

    #[test]
    fn scheme_b_meets_relative_test() {
        let g = SquaredNorm::new(2);
        let cfg = IppmConfig {
            record_iterates: true,
            ..IppmConfig::new(1.0, IppmScheme::B, 0.4, 2.0).unwrap()
        };
        let out = ippm_baseline_solve(&g, InnerProx::new(&g, 1.0).inner_only(), &[3.0, -1.0], &cfg).unwrap();
        let recs = out.trace.records();
        for w in recs.windows(2) {
            let x = w[0].x.as_ref().unwrap();
            let p = w[1].x.as_ref().unwrap();
            let exact = linalg::scale(x, 0.5);
            let err = linalg::dist(p, &exact);
            assert!(err <= w[0].eps_k * linalg::dist(x, p) + 1e-15);
            // δ_k < 1/2 makes the step a ν₂-relative one: ‖g − ∇e‖ ≤ ‖g‖/2
            assert!(err <= 0.5 * linalg::dist(x, p));
        }
    }
}

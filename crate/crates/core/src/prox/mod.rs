//! Proximal mappings, Moreau envelopes and proximal point methods.
//!
//! Convex objectives are represented in composite form `g = s + r` with `s`
//! smooth and `r` "simple" (closed-form proximal mapping). The proximal
//! subproblem
//!
//! ```text
//! φ_λ(y) = g(y) + ‖y − x‖²/(2λ)
//! ```
//!
//! is `1/λ`-strongly convex, so any `v ∈ ∂φ_λ(p)` certifies
//! `‖p − Prox_{λg}(x)‖ ≤ λ‖v‖`. The inner solver here is forward–backward
//! splitting and reports such a subgradient at its last point.

mod functions;
mod gippm;
mod ippm;

pub use functions::{AbsValue, BoxIndicator, L1Norm, L1RegularizedLeastSquares, SquaredNorm, Zero};
pub use gippm::{gippm_solve, GippmConfig, MoreauEnvelope};
pub use ippm::{ippm_baseline_solve, IppmConfig, IppmScheme};

use crate::linalg;
use crate::oracles::OracleError;
use crate::rng::SeededRng;

/// A proper l.s.c. convex function `g = s + r`.
pub trait ConvexProblem {
    fn dim(&self) -> usize;

    /// Smooth convex part `s`. Defaults to zero.
    fn smooth_value(&self, _y: &[f64]) -> f64 {
        0.0
    }

    fn smooth_gradient(&self, y: &[f64]) -> Vec<f64> {
        vec![0.0; y.len()]
    }

    /// Lipschitz constant of `∇s`.
    fn smooth_lipschitz(&self) -> f64 {
        0.0
    }

    /// Simple part `r`; `None` stands for `+∞`.
    fn simple_value(&self, y: &[f64]) -> Option<f64>;

    /// `Prox_{t r}(u)`.
    fn simple_prox(&self, t: f64, u: &[f64]) -> Vec<f64>;

    fn value(&self, y: &[f64]) -> Option<f64> {
        self.simple_value(y).map(|r| r + self.smooth_value(y))
    }

    /// Closed-form `Prox_{λg}(x)`, when one is known.
    fn exact_prox(&self, _lambda: f64, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn name(&self) -> String {
        "convex".into()
    }
}

/// Result of an inner solve of `φ_λ` anchored at some `x`.
#[derive(Debug, Clone)]
pub struct ProxSolve {
    pub point: Vec<f64>,
    /// `‖v‖` for a certified `v ∈ ∂φ_λ(point)`.
    pub certificate: f64,
    pub iterations: u64,
}

/// `φ_λ(y) = g(y) + ‖y − x‖²/(2λ)`, or `None` outside `dom g`.
pub fn prox_objective<G: ConvexProblem + ?Sized>(g: &G, lambda: f64, x: &[f64], y: &[f64]) -> Option<f64> {
    g.value(y).map(|v| v + linalg::dist(y, x).powi(2) / (2.0 * lambda))
}

/// Minimises `φ_λ` by forward–backward splitting from `start` until the
/// certified subgradient norm is at most `target`.
///
/// Every step counts as one inner iteration, including the first one, which
/// is needed to produce a certificate at all.
pub fn solve_prox_subproblem<G: ConvexProblem + ?Sized>(
    g: &G,
    lambda: f64,
    x: &[f64],
    start: &[f64],
    target: f64,
    max_iters: u64,
) -> Result<ProxSolve, OracleError> {
    let step = 1.0 / (g.smooth_lipschitz() + 1.0 / lambda);
    let grad_smooth = |y: &[f64]| {
        let mut gr = g.smooth_gradient(y);
        for ((gi, yi), xi) in gr.iter_mut().zip(y).zip(x) {
            *gi += (yi - xi) / lambda;
        }
        gr
    };

    let mut y = start.to_vec();
    let mut grad_y = grad_smooth(&y);
    let mut best = ProxSolve {
        point: y.clone(),
        certificate: f64::INFINITY,
        iterations: 0,
    };
    let mut iterations = 0u64;
    while iterations < max_iters {
        let forward: Vec<f64> = y.iter().zip(&grad_y).map(|(yi, gi)| yi - step * gi).collect();
        let next = g.simple_prox(step, &forward);
        linalg::ensure_finite(&next).map_err(|_| OracleError::NonFinite)?;
        let grad_next = grad_smooth(&next);
        iterations += 1;
        // ∇S(y⁺) − ∇S(y) + (y − y⁺)/t lies in ∂φ_λ(y⁺)
        let mut sub = grad_next.clone();
        for i in 0..sub.len() {
            sub[i] += (y[i] - next[i]) / step - grad_y[i];
        }
        let cert = linalg::norm(&sub);
        y = next;
        grad_y = grad_next;
        if cert < best.certificate {
            best = ProxSolve {
                point: y.clone(),
                certificate: cert,
                iterations,
            };
        }
        if cert <= target {
            return Ok(ProxSolve {
                point: y,
                certificate: cert,
                iterations,
            });
        }
    }
    Err(OracleError::InnerBudget {
        certificate: best.certificate,
        iterations,
    })
}

/// Answers `p` with `‖p − Prox_{λg}(x)‖ ≤ λ·eps_level`.
pub trait ProxOracle {
    fn lambda(&self) -> f64;

    fn prox(&mut self, x: &[f64], eps_level: f64) -> Result<Vec<f64>, OracleError>;

    /// Cumulative inner work.
    fn cost(&self) -> u64;
}

impl<T: ProxOracle + ?Sized> ProxOracle for &mut T {
    fn lambda(&self) -> f64 {
        (**self).lambda()
    }
    fn prox(&mut self, x: &[f64], eps_level: f64) -> Result<Vec<f64>, OracleError> {
        (**self).prox(x, eps_level)
    }
    fn cost(&self) -> u64 {
        (**self).cost()
    }
}

/// Free-function form of [`ProxOracle::prox`].
pub fn inexact_prox<O: ProxOracle + ?Sized>(
    oracle: &mut O,
    x: &[f64],
    eps_level: f64,
) -> Result<Vec<f64>, OracleError> {
    oracle.prox(x, eps_level)
}

/// Prox oracle backed by [`solve_prox_subproblem`], warm-started from the
/// previous answer. Uses the closed form instead when the problem has one and
/// `use_exact` is set.
pub struct InnerProx<'a, G: ConvexProblem + ?Sized> {
    problem: &'a G,
    lambda: f64,
    use_exact: bool,
    max_inner: u64,
    warm: Option<Vec<f64>>,
    cost: u64,
}

impl<'a, G: ConvexProblem + ?Sized> InnerProx<'a, G> {
    pub fn new(problem: &'a G, lambda: f64) -> Self {
        InnerProx {
            problem,
            lambda,
            use_exact: true,
            max_inner: 1_000_000,
            warm: None,
            cost: 0,
        }
    }

    /// Ignore any closed-form prox and always run the inner solver.
    pub fn inner_only(mut self) -> Self {
        self.use_exact = false;
        self
    }

    pub fn with_inner_budget(mut self, max_inner: u64) -> Self {
        self.max_inner = max_inner;
        self
    }

    /// Forget the warm start.
    pub fn reset(&mut self) {
        self.warm = None;
    }
}

impl<G: ConvexProblem + ?Sized> ProxOracle for InnerProx<'_, G> {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn prox(&mut self, x: &[f64], eps_level: f64) -> Result<Vec<f64>, OracleError> {
        if self.use_exact {
            if let Some(p) = self.problem.exact_prox(self.lambda, x) {
                return Ok(p);
            }
        }
        let start = match &self.warm {
            Some(w) if w.len() == x.len() => w.clone(),
            _ => x.to_vec(),
        };
        let sol = solve_prox_subproblem(self.problem, self.lambda, x, &start, eps_level, self.max_inner);
        match sol {
            Ok(s) => {
                self.cost += s.iterations;
                self.warm = Some(s.point.clone());
                Ok(s.point)
            }
            Err(e) => {
                if let OracleError::InnerBudget { iterations, .. } = &e {
                    self.cost += iterations;
                }
                Err(e)
            }
        }
    }

    fn cost(&self) -> u64 {
        self.cost
    }
}

/// Test double: the exact prox perturbed by a random vector of norm at most
/// `λ·eps_level`.
pub struct NoisyProx<'a, G: ConvexProblem + ?Sized> {
    problem: &'a G,
    lambda: f64,
    rng: SeededRng,
    cost: u64,
}

impl<'a, G: ConvexProblem + ?Sized> NoisyProx<'a, G> {
    /// Panics on the first query if `problem` has no closed-form prox.
    pub fn new(problem: &'a G, lambda: f64, seed: u64) -> Self {
        NoisyProx {
            problem,
            lambda,
            rng: SeededRng::new(seed),
            cost: 0,
        }
    }
}

impl<G: ConvexProblem + ?Sized> ProxOracle for NoisyProx<'_, G> {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn prox(&mut self, x: &[f64], eps_level: f64) -> Result<Vec<f64>, OracleError> {
        let mut p = self
            .problem
            .exact_prox(self.lambda, x)
            .ok_or(OracleError::MissingGradient)?;
        let dir = self.rng.unit_vector(x.len());
        let r = self.lambda * eps_level * self.rng.uniform();
        linalg::axpy(r, &dir, &mut p);
        self.cost += 1;
        Ok(p)
    }

    fn cost(&self) -> u64 {
        self.cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_function_prox_is_identity() {
        let g = Zero::new(3);
        let x = vec![1.0, -2.0, 0.5];
        let mut o = InnerProx::new(&g, 0.7).inner_only();
        let p = inexact_prox(&mut o, &x, 1e-9).unwrap();
        assert_eq!(p, x);
    }

    #[test]
    fn squared_norm_prox_within_level() {
        let g = SquaredNorm::new(2);
        let mut o = InnerProx::new(&g, 1.0).inner_only();
        for level in [1e-1, 1e-3, 1e-6] {
            o.reset();
            let p = inexact_prox(&mut o, &[2.0, 0.0], level).unwrap();
            assert!(linalg::dist(&p, &[1.0, 0.0]) <= 1.0 * level, "{p:?}");
        }
    }

    #[test]
    fn l1_prox_matches_soft_threshold() {
        let g = L1Norm::new(4, 0.3);
        let lambda = 0.5;
        let x = vec![1.0, -0.1, 0.15, -2.0];
        let exact = crate::lasso::soft_threshold(&x, lambda * 0.3);
        let mut o = InnerProx::new(&g, lambda).inner_only();
        let level = 1e-7;
        let p = inexact_prox(&mut o, &x, level).unwrap();
        assert!(linalg::dist(&p, &exact) <= lambda * level);
    }

    #[test]
    fn certificate_bounds_distance_to_prox() {
        let mut rng = SeededRng::new(4);
        let g = L1RegularizedLeastSquares::random(12, 8, 0.2, &mut rng);
        let lambda = 0.8;
        let x = rng.gaussian_vec(8);
        let tight = solve_prox_subproblem(&g, lambda, &x, &x, 1e-13, 1_000_000).unwrap();
        for target in [1e-1, 1e-2, 1e-4] {
            let s = solve_prox_subproblem(&g, lambda, &x, &x, target, 1_000_000).unwrap();
            assert!(s.certificate <= target);
            assert!(linalg::dist(&s.point, &tight.point) <= lambda * s.certificate + 1e-12);
        }
    }

    #[test]
    fn budget_exhaustion_reports_certificate() {
        let mut rng = SeededRng::new(9);
        let g = L1RegularizedLeastSquares::random(12, 8, 0.2, &mut rng);
        let x = rng.gaussian_vec(8);
        match solve_prox_subproblem(&g, 100.0, &x, &x, 1e-14, 3) {
            Err(OracleError::InnerBudget {
                certificate,
                iterations,
            }) => {
                assert_eq!(iterations, 3);
                assert!(certificate.is_finite() && certificate > 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exact_prox_satisfies_optimality_on_samples() {
        // x − p ∈ λ∂g(p) ⇔ g(z) ≥ g(p) + ⟨(x − p)/λ, z − p⟩ for all z
        let mut rng = SeededRng::new(21);
        let lambda = 0.6;
        let problems: Vec<Box<dyn ConvexProblem>> = vec![
            Box::new(SquaredNorm::new(3)),
            Box::new(L1Norm::new(3, 0.7)),
            Box::new(AbsValue),
            Box::new(BoxIndicator::new(3, 0.5)),
            Box::new(Zero::new(3)),
        ];
        for g in &problems {
            let n = g.dim();
            for _ in 0..50 {
                let x: Vec<f64> = rng.gaussian_vec(n).iter().map(|v| 2.0 * v).collect();
                let p = g.exact_prox(lambda, &x).unwrap();
                let gp = g.value(&p).unwrap();
                let v = linalg::scale(&linalg::sub(&x, &p), 1.0 / lambda);
                for _ in 0..20 {
                    let z: Vec<f64> = rng.gaussian_vec(n).iter().map(|v| 2.0 * v).collect();
                    if let Some(gz) = g.value(&z) {
                        let rhs = gp + linalg::dot(&v, &linalg::sub(&z, &p));
                        assert!(gz >= rhs - 1e-10, "{}: {gz} < {rhs}", g.name());
                    }
                }
            }
        }
    }
}

//! Inexact gradient oracles: answer `g` with `‖g − ∇f(x)‖ ≤ ε` for any
//! requested `ε > 0`.

use thiserror::Error;

use crate::linalg;
use crate::problem::SmoothProblem;
use crate::prox::ProxOracle;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("objective returned a non-finite value")]
    NonFinite,
    /// Floating-point cancellation in the difference quotient would exceed
    /// the error budget at this `ε`.
    #[error("requested error {requested:e} is below the attainable floating-point floor {floor:e}")]
    PrecisionFloor { requested: f64, floor: f64 },
    #[error("inner solver ran out of budget after {iterations} iterations (certificate {certificate:e})")]
    InnerBudget { certificate: f64, iterations: u64 },
    #[error("the problem does not expose an exact gradient or prox")]
    MissingGradient,
    #[error("invalid oracle argument: {0}")]
    InvalidArgument(String),
}

pub trait GradientOracle {
    fn query(&mut self, x: &[f64], eps: f64) -> Result<Vec<f64>, OracleError>;

    /// Cumulative work: function evaluations, or inner iterations for oracles
    /// backed by an inner solver.
    fn cost(&self) -> u64;

    /// Point reached by the step `x − g/L` for the last answer, when the
    /// oracle knows it exactly. Proximal oracles return their prox point so
    /// that the step lands on it without round-off.
    fn step_target(&self) -> Option<&[f64]> {
        None
    }
}

impl<T: GradientOracle + ?Sized> GradientOracle for &mut T {
    fn query(&mut self, x: &[f64], eps: f64) -> Result<Vec<f64>, OracleError> {
        (**self).query(x, eps)
    }
    fn cost(&self) -> u64 {
        (**self).cost()
    }
    fn step_target(&self) -> Option<&[f64]> {
        (**self).step_target()
    }
}

impl<T: GradientOracle + ?Sized> GradientOracle for Box<T> {
    fn query(&mut self, x: &[f64], eps: f64) -> Result<Vec<f64>, OracleError> {
        (**self).query(x, eps)
    }
    fn cost(&self) -> u64 {
        (**self).cost()
    }
    fn step_target(&self) -> Option<&[f64]> {
        (**self).step_target()
    }
}

// Relative accuracy assumed for a single objective evaluation.
const EVAL_ROUNDING: f64 = 4.0 * f64::EPSILON;

fn check_positive(name: &str, v: f64) -> Result<(), OracleError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(OracleError::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

fn finite(v: f64) -> Result<f64, OracleError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(OracleError::NonFinite)
    }
}

/// Forward-difference step: half the largest step `2ε/(L√n)` that keeps the
/// truncation error `L√nδ/2` within `ε`.
pub fn ffd_step(eps: f64, lipschitz: f64, n: usize) -> f64 {
    eps / (lipschitz * (n as f64).sqrt())
}

/// Centered-difference step: `δ² = 12ε/(M√n)`, half the admissible
/// `24ε/(M√n)`, so the truncation error `√n M δ²/24` is `ε/2`.
pub fn cfd_step(eps: f64, hessian_lipschitz: f64, n: usize) -> f64 {
    (12.0 * eps / (hessian_lipschitz * (n as f64).sqrt())).sqrt()
}

/// Forward-difference gradient with truncation error at most `ε/2`.
///
/// Uses `n + 1` evaluations. Fails with [`OracleError::PrecisionFloor`] when
/// the estimated cancellation error of the quotients would exceed the other
/// `ε/2`.
pub fn ffd_gradient<F: Fn(&[f64]) -> f64>(
    f: F,
    x: &[f64],
    eps: f64,
    lipschitz: f64,
) -> Result<Vec<f64>, OracleError> {
    check_positive("eps", eps)?;
    check_positive("L", lipschitz)?;
    let n = x.len();
    let delta = ffd_step(eps, lipschitz, n);
    let f0 = finite(f(x))?;
    let mut g = vec![0.0; n];
    let mut rounding_sq = 0.0;
    let mut probe = x.to_vec();
    for i in 0..n {
        probe[i] = x[i] + delta;
        // the step actually taken after rounding x[i] + δ
        let h = probe[i] - x[i];
        let fi = finite(f(&probe))?;
        probe[i] = x[i];
        g[i] = (fi - f0) / h;
        let r = 2.0 * EVAL_ROUNDING * f0.abs().max(fi.abs()) / h;
        rounding_sq += r * r;
    }
    let rounding = rounding_sq.sqrt();
    if rounding > 0.5 * eps {
        return Err(OracleError::PrecisionFloor {
            requested: eps,
            floor: 2.0 * rounding,
        });
    }
    Ok(g)
}

/// Centered-difference gradient with truncation error at most `ε/2`; `f`
/// must be `C²` with `M`-Lipschitz Hessian. Uses `2n` evaluations.
pub fn cfd_gradient<F: Fn(&[f64]) -> f64>(
    f: F,
    x: &[f64],
    eps: f64,
    hessian_lipschitz: f64,
) -> Result<Vec<f64>, OracleError> {
    check_positive("eps", eps)?;
    check_positive("M", hessian_lipschitz)?;
    let n = x.len();
    let delta = cfd_step(eps, hessian_lipschitz, n);
    let mut g = vec![0.0; n];
    let mut rounding_sq = 0.0;
    let mut probe = x.to_vec();
    for i in 0..n {
        probe[i] = x[i] + 0.5 * delta;
        let up = probe[i];
        let fp = finite(f(&probe))?;
        probe[i] = x[i] - 0.5 * delta;
        let h = up - probe[i];
        let fm = finite(f(&probe))?;
        probe[i] = x[i];
        g[i] = (fp - fm) / h;
        let r = 2.0 * EVAL_ROUNDING * fp.abs().max(fm.abs()) / h;
        rounding_sq += r * r;
    }
    let rounding = rounding_sq.sqrt();
    if rounding > 0.5 * eps {
        return Err(OracleError::PrecisionFloor {
            requested: eps,
            floor: 2.0 * rounding,
        });
    }
    Ok(g)
}

/// `∇f(x) + u` with `u` a uniformly random direction scaled by a radius drawn
/// uniformly from `[0, ε]`.
pub fn noisy_oracle<P: SmoothProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    eps: f64,
    rng: &mut SeededRng,
) -> Result<Vec<f64>, OracleError> {
    let mut g = problem.gradient(x).ok_or(OracleError::MissingGradient)?;
    let dir = rng.unit_vector(x.len());
    let radius = eps * rng.uniform();
    linalg::axpy(radius, &dir, &mut g);
    Ok(g)
}

/// Error-free oracle; answers every query with the exact gradient.
pub struct ExactOracle<P> {
    problem: P,
    cost: u64,
}

impl<P: SmoothProblem> ExactOracle<P> {
    pub fn new(problem: P) -> Self {
        ExactOracle { problem, cost: 0 }
    }
}

impl<P: SmoothProblem> GradientOracle for ExactOracle<P> {
    fn query(&mut self, x: &[f64], _eps: f64) -> Result<Vec<f64>, OracleError> {
        self.cost += 1;
        self.problem.gradient(x).ok_or(OracleError::MissingGradient)
    }
    fn cost(&self) -> u64 {
        self.cost
    }
}

/// [`ffd_gradient`] on a problem's value function; recomputes from scratch at
/// every query.
pub struct FfdOracle<P> {
    problem: P,
    cost: u64,
}

impl<P: SmoothProblem> FfdOracle<P> {
    pub fn new(problem: P) -> Self {
        FfdOracle { problem, cost: 0 }
    }
}

impl<P: SmoothProblem> GradientOracle for FfdOracle<P> {
    fn query(&mut self, x: &[f64], eps: f64) -> Result<Vec<f64>, OracleError> {
        self.cost += x.len() as u64 + 1;
        ffd_gradient(|y| self.problem.value(y), x, eps, self.problem.lipschitz())
    }
    fn cost(&self) -> u64 {
        self.cost
    }
}

/// [`cfd_gradient`] using the problem's Hessian Lipschitz constant.
pub struct CfdOracle<P> {
    problem: P,
    cost: u64,
}

impl<P: SmoothProblem> CfdOracle<P> {
    pub fn new(problem: P) -> Result<Self, OracleError> {
        if problem.hessian_lipschitz().is_none() {
            return Err(OracleError::InvalidArgument(
                "centered differences need a Hessian Lipschitz constant".into(),
            ));
        }
        Ok(CfdOracle { problem, cost: 0 })
    }
}

impl<P: SmoothProblem> GradientOracle for CfdOracle<P> {
    fn query(&mut self, x: &[f64], eps: f64) -> Result<Vec<f64>, OracleError> {
        self.cost += 2 * x.len() as u64;
        let m = self.problem.hessian_lipschitz().expect("checked in new");
        cfd_gradient(|y| self.problem.value(y), x, eps, m)
    }
    fn cost(&self) -> u64 {
        self.cost
    }
}

/// Exact gradient plus bounded random noise; see [`noisy_oracle`].
pub struct NoisyOracle<P> {
    problem: P,
    rng: SeededRng,
    cost: u64,
}

impl<P: SmoothProblem> NoisyOracle<P> {
    pub fn new(problem: P, seed: u64) -> Self {
        NoisyOracle {
            problem,
            rng: SeededRng::new(seed),
            cost: 0,
        }
    }
}

impl<P: SmoothProblem> GradientOracle for NoisyOracle<P> {
    fn query(&mut self, x: &[f64], eps: f64) -> Result<Vec<f64>, OracleError> {
        self.cost += 1;
        noisy_oracle(&self.problem, x, eps, &mut self.rng)
    }
    fn cost(&self) -> u64 {
        self.cost
    }
}

/// Gradient of the Moreau envelope `e_λg` from an inexact prox:
/// `G = (x − p)/λ` with `‖p − Prox_{λg}(x)‖ ≤ λε`, hence `‖G − ∇e_λg(x)‖ ≤ ε`.
pub struct MoreauOracle<O> {
    prox: O,
    last_point: Option<Vec<f64>>,
}

impl<O: ProxOracle> MoreauOracle<O> {
    pub fn new(prox: O) -> Self {
        MoreauOracle {
            prox,
            last_point: None,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.prox.lambda()
    }

    /// Approximate prox point behind the last answer.
    pub fn last_prox_point(&self) -> Option<&[f64]> {
        self.last_point.as_deref()
    }

    pub fn into_inner(self) -> O {
        self.prox
    }
}

impl<O: ProxOracle> GradientOracle for MoreauOracle<O> {
    fn query(&mut self, x: &[f64], eps: f64) -> Result<Vec<f64>, OracleError> {
        check_positive("eps", eps)?;
        let lambda = self.prox.lambda();
        let p = self.prox.prox(x, eps)?;
        let g = x.iter().zip(&p).map(|(xi, pi)| (xi - pi) / lambda).collect();
        self.last_point = Some(p);
        Ok(g)
    }

    fn cost(&self) -> u64 {
        self.prox.cost()
    }

    fn step_target(&self) -> Option<&[f64]> {
        self.last_point.as_deref()
    }
}

/// One-shot form of [`MoreauOracle::query`].
pub fn moreau_gradient_oracle<O: ProxOracle>(prox: &mut O, x: &[f64], eps: f64) -> Result<Vec<f64>, OracleError> {
    let mut oracle = MoreauOracle::new(prox);
    oracle.query(x, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Quadratic;
    use crate::prox::{AbsValue, InnerProx, SquaredNorm};

    #[test]
    fn ffd_exact_on_affine() {
        let f = |x: &[f64]| 2.0 * x[0];
        let g = ffd_gradient(f, &[0.3, -1.0, 4.0], 0.5, 1.0).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!(g[1].abs() < 1e-12 && g[2].abs() < 1e-12);
    }

    #[test]
    fn ffd_half_square_worked_example() {
        let f = |x: &[f64]| 0.5 * x[0] * x[0];
        assert_eq!(ffd_step(0.1, 1.0, 1), 0.1);
        let g = ffd_gradient(f, &[1.0], 0.1, 1.0).unwrap();
        assert!((g[0] - 1.05).abs() < 1e-12, "{}", g[0]);
        assert!((g[0] - 1.0).abs() <= 0.1);
    }

    #[test]
    fn ffd_random_quadratics_within_bound() {
        for seed in 0..100 {
            let mut rng = SeededRng::new(seed);
            let q = Quadratic::random_spd(5, &mut rng);
            let x = rng.gaussian_vec(5);
            let eps = 0.05;
            let g = ffd_gradient(|y| q.value(y), &x, eps, q.lipschitz()).unwrap();
            let exact = q.gradient(&x).unwrap();
            let delta = ffd_step(eps, q.lipschitz(), 5);
            let bound = q.lipschitz() * 5f64.sqrt() * delta / 2.0;
            assert!(linalg::dist(&g, &exact) <= bound + 1e-12);
        }
    }

    #[test]
    fn cfd_exact_on_quadratic() {
        let mut rng = SeededRng::new(12);
        let q = Quadratic::random_spd(4, &mut rng);
        let x = rng.gaussian_vec(4);
        let g = cfd_gradient(|y| q.value(y), &x, 1e-3, 1.0).unwrap();
        assert!(linalg::dist(&g, &q.gradient(&x).unwrap()) < 1e-9);
    }

    #[test]
    fn cfd_cubic_error_equals_bound() {
        let f = |x: &[f64]| x[0].powi(3) / 6.0;
        let x = 0.7;
        let eps = 1e-2;
        let delta = cfd_step(eps, 1.0, 1);
        let g = cfd_gradient(f, &[x], eps, 1.0).unwrap();
        let err = g[0] - x * x / 2.0;
        assert!((err - delta * delta / 24.0).abs() < 1e-12);
        assert!((err - eps / 2.0).abs() < 1e-12);
    }

    #[test]
    fn cfd_sine_at_zero() {
        let g = cfd_gradient(|x: &[f64]| x[0].sin(), &[0.0], 1e-4, 1.0).unwrap();
        assert!((g[0] - 1.0).abs() <= 1e-4);
    }

    #[test]
    fn difference_steps_stay_inside_admissible_range() {
        for &eps in &[1e-6, 1e-3, 1.0] {
            for &n in &[1usize, 5, 50] {
                for &l in &[0.1, 1.0, 40.0] {
                    let sqrt_n = (n as f64).sqrt();
                    assert!(ffd_step(eps, l, n) < 2.0 * eps / (l * sqrt_n));
                    assert!(cfd_step(eps, l, n).powi(2) < 24.0 * eps / (l * sqrt_n));
                }
            }
        }
    }

    #[test]
    fn precision_floor_is_reported() {
        let f = |x: &[f64]| 1e6 + 0.5 * x[0] * x[0];
        let err = ffd_gradient(f, &[1.0], 1e-9, 1.0).unwrap_err();
        assert!(matches!(err, OracleError::PrecisionFloor { .. }));
    }

    #[test]
    fn non_finite_value_fails() {
        let f = |x: &[f64]| if x[0] > 1.0 { f64::NAN } else { 0.0 };
        assert_eq!(ffd_gradient(f, &[1.0], 1.0, 1.0), Err(OracleError::NonFinite));
        assert_eq!(cfd_gradient(f, &[1.0], 1.0, 1.0), Err(OracleError::NonFinite));
    }

    #[test]
    fn noisy_oracle_vanishing_eps_is_exact() {
        let q = Quadratic::diagonal(&[1.0, 4.0]);
        let mut rng = SeededRng::new(0);
        let x = [1.0, -2.0];
        let g = noisy_oracle(&q, &x, 1e-300, &mut rng).unwrap();
        assert_eq!(g, q.gradient(&x).unwrap());
    }

    #[test]
    fn noisy_oracle_is_seed_deterministic() {
        let q = Quadratic::sphere(3);
        let mut a = NoisyOracle::new(&q, 77);
        let mut b = NoisyOracle::new(&q, 77);
        for i in 0..20 {
            let x = [i as f64, 1.0, -1.0];
            assert_eq!(a.query(&x, 0.3).unwrap(), b.query(&x, 0.3).unwrap());
        }
    }

    #[test]
    fn noisy_oracle_audit() {
        let q = Quadratic::sphere(4);
        let mut o = NoisyOracle::new(&q, 5);
        let mut rng = SeededRng::new(6);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let x = rng.gaussian_vec(4);
            let eps = rng.uniform_in(1e-6, 1.0);
            let g = o.query(&x, eps).unwrap();
            worst = worst.max(linalg::dist(&g, &x) / eps);
        }
        assert!(worst <= 1.0, "{worst}");
    }

    #[test]
    fn moreau_abs_at_origin() {
        let mut prox = InnerProx::new(&AbsValue, 1.0).inner_only();
        let g = moreau_gradient_oracle(&mut prox, &[0.0], 0.1).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn moreau_abs_away_from_origin() {
        let mut prox = InnerProx::new(&AbsValue, 1.0).inner_only();
        let g = moreau_gradient_oracle(&mut prox, &[3.0], 0.1).unwrap();
        assert!((g[0] - 1.0).abs() <= 0.1);
    }

    #[test]
    fn moreau_half_square() {
        let sq = SquaredNorm::new(2);
        let mut prox = InnerProx::new(&sq, 1.0).inner_only();
        for eps in [0.5, 1e-2, 1e-5] {
            let g = moreau_gradient_oracle(&mut prox, &[2.0, 0.0], eps).unwrap();
            assert!(linalg::dist(&g, &[1.0, 0.0]) <= eps);
        }
    }

    #[test]
    fn moreau_oracle_exposes_step_target() {
        let sq = SquaredNorm::new(2);
        let mut o = MoreauOracle::new(InnerProx::new(&sq, 1.0));
        assert!(o.step_target().is_none());
        o.query(&[2.0, 0.0], 0.1).unwrap();
        assert_eq!(o.step_target().unwrap(), &[1.0, 0.0]);
    }
}

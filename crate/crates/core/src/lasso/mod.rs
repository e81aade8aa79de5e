//! Lasso experiments: `min ½‖Ax − b‖² + γ‖x‖₁` solved through its dual
//!
//! ```text
//! max −½‖y‖² + ⟨b, y⟩   s.t.  −Aᵀy − z = −c,  ‖z‖∞ ≤ γ,   c = Aᵀb,
//! ```
//!
//! whose augmented Lagrangian multiplier is the Lasso variable `x`. For a
//! fixed multiplier `x^k`, minimising over `z` gives `Ψ_k(y)` in closed form
//! and leaves the 1-strongly convex function `ψ_k(y)`, minimised by gradient
//! descent.

mod blur;
mod instance_io;
mod solve;

pub use blur::{blur_instance, gaussian_kernel, BlurOperator, MAX_BLUR_SIDE};
pub use instance_io::{read_instance, write_instance, InstanceMeta, MAGIC};
pub use solve::{
    gialm_lasso_solve, DualConstraint, LassoDualObjective, LassoMethod, LassoOptions, LassoRun, LassoSummary,
    PsiSolver, ResidualRow,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, operator_norm, DenseMatrix, LinearOperator};
use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum LassoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed instance file: {0}")]
    Format(String),
    #[error("{0}")]
    Invalid(String),
}

/// Componentwise `sign(uᵢ)·max(|uᵢ| − τ, 0)`, the proximal mapping of `τ‖·‖₁`.
pub fn soft_threshold(u: &[f64], tau: f64) -> Vec<f64> {
    u.iter()
        .map(|&v| {
            if v > tau {
                v - tau
            } else if v < -tau {
                v + tau
            } else {
                0.0
            }
        })
        .collect()
}

/// Componentwise clamp to `[−γ, γ]`.
pub fn project_linf_ball(u: &[f64], gamma: f64) -> Vec<f64> {
    u.iter().map(|&v| v.clamp(-gamma, gamma)).collect()
}

/// The Lasso design: an explicit matrix or the matrix-free blur.
#[derive(Debug, Clone)]
pub enum LassoOperator {
    Dense(DenseMatrix),
    Blur(BlurOperator),
}

impl LinearOperator for LassoOperator {
    fn rows(&self) -> usize {
        match self {
            LassoOperator::Dense(a) => a.rows(),
            LassoOperator::Blur(a) => a.rows(),
        }
    }
    fn cols(&self) -> usize {
        match self {
            LassoOperator::Dense(a) => a.cols(),
            LassoOperator::Blur(a) => a.cols(),
        }
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            LassoOperator::Dense(a) => a.apply_into(x, out),
            LassoOperator::Blur(a) => a.apply_into(x, out),
        }
    }
    fn apply_adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        match self {
            LassoOperator::Dense(a) => a.apply_adjoint_into(y, out),
            LassoOperator::Blur(a) => a.apply_adjoint_into(y, out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    Absolute(f64),
    /// `γ = factor·‖Aᵀb‖∞`.
    Scaled(f64),
}

#[derive(Debug, Clone)]
pub struct LassoInstance {
    pub a: LassoOperator,
    pub b: Vec<f64>,
    pub gamma: f64,
    /// Default proximal parameter for this instance.
    pub lambda: f64,
    /// `Aᵀb`.
    pub c: Vec<f64>,
    /// Power-iteration estimate of `‖A‖`, including the safety factor.
    pub op_norm: f64,
    /// Ground truth, for synthetic images.
    pub truth: Option<Vec<f64>>,
}

impl LassoInstance {
    pub fn new(a: LassoOperator, b: Vec<f64>, gamma: f64, lambda: f64) -> Result<Self, LassoError> {
        if a.rows() != b.len() {
            return Err(LassoError::Invalid(format!(
                "A has {} rows but b has length {}",
                a.rows(),
                b.len()
            )));
        }
        if !(gamma > 0.0 && lambda > 0.0) {
            return Err(LassoError::Invalid("gamma and lambda must be positive".into()));
        }
        linalg::ensure_finite(&b).map_err(|e| LassoError::Invalid(e.to_string()))?;
        let c = a.apply_adjoint(&b);
        let op_norm = operator_norm(&a, 2000, 1e-12);
        Ok(LassoInstance {
            a,
            b,
            gamma,
            lambda,
            c,
            op_norm,
            truth: None,
        })
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    /// `½‖Ax − b‖² + γ‖x‖₁`.
    pub fn primal_objective(&self, x: &[f64]) -> f64 {
        0.5 * linalg::norm_sq(&linalg::sub(&self.a.apply(x), &self.b)) + self.gamma * linalg::norm_l1(x)
    }

    /// Dual function at multiplier `x`: `−½‖Ax‖² + ⟨c, x⟩ − γ‖x‖₁`.
    pub fn dual_function(&self, x: &[f64]) -> f64 {
        -0.5 * linalg::norm_sq(&self.a.apply(x)) + linalg::dot(&self.c, x) - self.gamma * linalg::norm_l1(x)
    }
}

/// Point `x − λ(Aᵀy − c)` thresholded at `λγ`, shared by `ψ_k` and its
/// gradient. `aty` is `Aᵀy`.
fn shrunk(aty: &[f64], x_k: &[f64], lambda: f64, inst: &LassoInstance) -> Vec<f64> {
    let u: Vec<f64> = x_k
        .iter()
        .zip(aty)
        .zip(&inst.c)
        .map(|((xi, ai), ci)| xi - lambda * (ai - ci))
        .collect();
    soft_threshold(&u, lambda * inst.gamma)
}

/// `ψ_k(y) = ½‖y‖² + ‖soft(x^k − λ(Aᵀy − c), λγ)‖²/(2λ) − ‖x^k‖²/(2λ)`.
pub fn psi_value(y: &[f64], x_k: &[f64], lambda: f64, inst: &LassoInstance) -> f64 {
    let s = shrunk(&inst.a.apply_adjoint(y), x_k, lambda, inst);
    0.5 * linalg::norm_sq(y) + (linalg::norm_sq(&s) - linalg::norm_sq(x_k)) / (2.0 * lambda)
}

/// `∇ψ_k(y) = y − A·soft(x^k − λ(Aᵀy − c), λγ)`.
pub fn psi_gradient(y: &[f64], x_k: &[f64], lambda: f64, inst: &LassoInstance) -> Vec<f64> {
    let s = shrunk(&inst.a.apply_adjoint(y), x_k, lambda, inst);
    linalg::sub(y, &inst.a.apply(&s))
}

/// `Ψ_k(y) = argmin_z L_λ(y, z, x^k) = clamp(x^k/λ − Aᵀy + c, γ)`.
pub fn capital_psi(y: &[f64], x_k: &[f64], lambda: f64, inst: &LassoInstance) -> Vec<f64> {
    let aty = inst.a.apply_adjoint(y);
    capital_psi_from(&aty, x_k, lambda, inst)
}

fn capital_psi_from(aty: &[f64], x_k: &[f64], lambda: f64, inst: &LassoInstance) -> Vec<f64> {
    let u: Vec<f64> = x_k
        .iter()
        .zip(aty)
        .zip(&inst.c)
        .map(|((xi, ai), ci)| xi / lambda - ai + ci)
        .collect();
    project_linf_ball(&u, inst.gamma)
}

/// Output of [`inner_solve_psi`].
#[derive(Debug, Clone)]
pub struct PsiSolve {
    pub y: Vec<f64>,
    /// `Aᵀy` at the returned point.
    pub aty: Vec<f64>,
    pub z: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: u64,
}

/// Gradient descent on `ψ_k` with step `1/(1 + λ‖A‖²)` from `warm_start`
/// until `‖∇ψ_k(y)‖ ≤ ω`. By 1-strong convexity the returned point is within
/// `ω²/2` of `inf ψ_k`.
///
/// On budget exhaustion returns the best gradient norm reached.
pub fn inner_solve_psi(
    x_k: &[f64],
    lambda: f64,
    inst: &LassoInstance,
    omega: f64,
    warm_start: &[f64],
    budget: u64,
) -> Result<PsiSolve, crate::oracles::OracleError> {
    inner_solve_psi_from(x_k, lambda, inst, omega, warm_start, None, budget)
}

/// [`inner_solve_psi`] with `Aᵀ·warm_start` supplied by the caller.
pub(crate) fn inner_solve_psi_from(
    x_k: &[f64],
    lambda: f64,
    inst: &LassoInstance,
    omega: f64,
    warm_start: &[f64],
    warm_aty: Option<Vec<f64>>,
    budget: u64,
) -> Result<PsiSolve, crate::oracles::OracleError> {
    let step = 1.0 / (1.0 + lambda * inst.op_norm * inst.op_norm);
    let mut y = warm_start.to_vec();
    let mut aty = warm_aty.unwrap_or_else(|| inst.a.apply_adjoint(&y));
    let mut grad = linalg::sub(&y, &inst.a.apply(&shrunk(&aty, x_k, lambda, inst)));
    let mut gn = linalg::norm(&grad);
    let mut iterations = 0u64;
    while gn > omega {
        if iterations == budget {
            return Err(crate::oracles::OracleError::InnerBudget {
                certificate: gn,
                iterations,
            });
        }
        linalg::axpy(-step, &grad, &mut y);
        aty = inst.a.apply_adjoint(&y);
        grad = linalg::sub(&y, &inst.a.apply(&shrunk(&aty, x_k, lambda, inst)));
        gn = linalg::norm(&grad);
        if !gn.is_finite() {
            return Err(crate::oracles::OracleError::NonFinite);
        }
        iterations += 1;
    }
    let z = capital_psi_from(&aty, x_k, lambda, inst);
    Ok(PsiSolve {
        y,
        aty,
        z,
        grad_norm: gn,
        iterations,
    })
}

/// `‖x − soft(x − Aᵀ(Ax − b), γ)‖ / (1 + ‖x‖ + ‖Ax − b‖)`.
pub fn eta_residual(x: &[f64], inst: &LassoInstance) -> f64 {
    eta_with_residual(x, &linalg::sub(&inst.a.apply(x), &inst.b), inst)
}

/// η given `r = Ax − b`.
pub(crate) fn eta_with_residual(x: &[f64], r: &[f64], inst: &LassoInstance) -> f64 {
    let g = inst.a.apply_adjoint(r);
    let u = linalg::sub(x, &g);
    let p = soft_threshold(&u, inst.gamma);
    linalg::dist(x, &p) / (1.0 + linalg::norm(x) + linalg::norm(r))
}

/// Gaussian `A` (`m×n`) and `b`, with `γ` absolute or relative to `‖Aᵀb‖∞`,
/// and `λ = 0.01`.
pub fn gen_random_instance(m: usize, n: usize, gamma: GammaMode, seed: u64) -> Result<LassoInstance, LassoError> {
    if m == 0 || n == 0 {
        return Err(LassoError::Invalid("m and n must be positive".into()));
    }
    let mut rng = SeededRng::new(seed);
    let a = DenseMatrix::gaussian(m, n, &mut rng);
    let b = rng.gaussian_vec(m);
    let g = match gamma {
        GammaMode::Absolute(g) => g,
        GammaMode::Scaled(f) => f * linalg::norm_inf(&a.apply_adjoint(&b)),
    };
    LassoInstance::new(LassoOperator::Dense(a), b, g, 0.01)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_argmin(objective: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n)
            .map(|i| lo + i as f64 * step)
            .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
            .unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[0.3], 0.5), vec![0.0]);
        assert_eq!(soft_threshold(&[2.0], 0.5), vec![1.5]);
        assert_eq!(soft_threshold(&[-2.0, 1.0], 0.5), vec![-1.5, 0.5]);
        let v = grid_argmin(|t| 0.5 * t.abs() + 0.5 * (t - 2.0).powi(2), -3.0, 3.0, 1e-4);
        assert!((v - 1.5).abs() <= 2e-4);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_linf_ball(&[0.2, -0.3], 1.0), vec![0.2, -0.3]);
        assert_eq!(project_linf_ball(&[2.0, -0.5], 1.0), vec![1.0, -0.5]);
    }

    #[test]
    fn random_instance_is_seed_deterministic() {
        let a = gen_random_instance(5, 7, GammaMode::Scaled(1e-3), 3).unwrap();
        let b = gen_random_instance(5, 7, GammaMode::Scaled(1e-3), 3).unwrap();
        match (&a.a, &b.a) {
            (LassoOperator::Dense(x), LassoOperator::Dense(y)) => assert_eq!(x.as_slice(), y.as_slice()),
            _ => unreachable!(),
        }
        assert_eq!(a.b, b.b);
        assert_eq!(a.gamma, 1e-3 * linalg::norm_inf(&a.c));
        assert_eq!(a.lambda, 0.01);
    }

    #[test]
    fn eta_zero_at_trivial_optimum() {
        let inst = LassoInstance::new(LassoOperator::Dense(DenseMatrix::identity(3)), vec![0.0; 3], 0.1, 1.0).unwrap();
        assert_eq!(eta_residual(&[0.0; 3], &inst), 0.0);
    }

    #[test]
    fn psi_collapses_for_zero_operator() {
        let inst = LassoInstance::new(LassoOperator::Dense(DenseMatrix::zeros(2, 3)), vec![1.0, 2.0], 0.2, 0.5).unwrap();
        assert_eq!(inst.op_norm, 0.0);
        let x = [1.0, -0.05, 0.3];
        let y = [0.4, -0.7];
        let expected = 0.5 * linalg::norm_sq(&y)
            + (linalg::norm_sq(&soft_threshold(&x, 0.1)) - linalg::norm_sq(&x)) / 1.0;
        assert!((psi_value(&y, &x, 0.5, &inst) - expected).abs() < 1e-15);
        assert_eq!(psi_gradient(&y, &x, 0.5, &inst), y.to_vec());
    }

    #[test]
    fn inner_solve_returns_warm_start_for_loose_omega() {
        let inst = gen_random_instance(6, 9, GammaMode::Absolute(0.1), 1).unwrap();
        let x = vec![0.1; 9];
        let w = vec![0.3; 6];
        let s = inner_solve_psi(&x, 0.01, &inst, 1e6, &w, 100).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(s.y, w);
    }

    #[test]
    fn inner_solve_budget() {
        let inst = gen_random_instance(6, 9, GammaMode::Absolute(0.1), 1).unwrap();
        let err = inner_solve_psi(&[0.0; 9], 1.0, &inst, 1e-300, &[0.0; 6], 5).unwrap_err();
        assert!(matches!(err, crate::oracles::OracleError::InnerBudget { iterations: 5, .. }));
    }
}

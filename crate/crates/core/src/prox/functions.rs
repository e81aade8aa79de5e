use crate::lasso::{project_linf_ball, soft_threshold};
use crate::linalg::{self, operator_norm, DenseMatrix, LinearOperator};
use crate::rng::SeededRng;

use super::ConvexProblem;

/// `g ≡ 0`.
#[derive(Debug, Clone)]
pub struct Zero {
    n: usize,
}

impl Zero {
    pub fn new(n: usize) -> Self {
        Zero { n }
    }
}

impl ConvexProblem for Zero {
    fn dim(&self) -> usize {
        self.n
    }
    fn simple_value(&self, _y: &[f64]) -> Option<f64> {
        Some(0.0)
    }
    fn simple_prox(&self, _t: f64, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }
    fn exact_prox(&self, _lambda: f64, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.to_vec())
    }
    fn name(&self) -> String {
        "zero".into()
    }
}

/// `½‖y‖²`, handled entirely as the smooth part.
#[derive(Debug, Clone)]
pub struct SquaredNorm {
    n: usize,
}

impl SquaredNorm {
    pub fn new(n: usize) -> Self {
        SquaredNorm { n }
    }
}

impl ConvexProblem for SquaredNorm {
    fn dim(&self) -> usize {
        self.n
    }
    fn smooth_value(&self, y: &[f64]) -> f64 {
        0.5 * linalg::norm_sq(y)
    }
    fn smooth_gradient(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
    fn smooth_lipschitz(&self) -> f64 {
        1.0
    }
    fn simple_value(&self, _y: &[f64]) -> Option<f64> {
        Some(0.0)
    }
    fn simple_prox(&self, _t: f64, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }
    fn exact_prox(&self, lambda: f64, x: &[f64]) -> Option<Vec<f64>> {
        Some(linalg::scale(x, 1.0 / (1.0 + lambda)))
    }
    fn name(&self) -> String {
        "squared_norm".into()
    }
}

/// `γ‖y‖₁`.
#[derive(Debug, Clone)]
pub struct L1Norm {
    n: usize,
    gamma: f64,
}

impl L1Norm {
    pub fn new(n: usize, gamma: f64) -> Self {
        L1Norm { n, gamma }
    }
}

impl ConvexProblem for L1Norm {
    fn dim(&self) -> usize {
        self.n
    }
    fn simple_value(&self, y: &[f64]) -> Option<f64> {
        Some(self.gamma * linalg::norm_l1(y))
    }
    fn simple_prox(&self, t: f64, u: &[f64]) -> Vec<f64> {
        soft_threshold(u, t * self.gamma)
    }
    fn exact_prox(&self, lambda: f64, x: &[f64]) -> Option<Vec<f64>> {
        Some(soft_threshold(x, lambda * self.gamma))
    }
    fn name(&self) -> String {
        "l1_norm".into()
    }
}

/// `|y|` on the real line.
#[derive(Debug, Clone, Copy)]
pub struct AbsValue;

impl ConvexProblem for AbsValue {
    fn dim(&self) -> usize {
        1
    }
    fn simple_value(&self, y: &[f64]) -> Option<f64> {
        Some(y[0].abs())
    }
    fn simple_prox(&self, t: f64, u: &[f64]) -> Vec<f64> {
        soft_threshold(u, t)
    }
    fn exact_prox(&self, lambda: f64, x: &[f64]) -> Option<Vec<f64>> {
        Some(soft_threshold(x, lambda))
    }
    fn name(&self) -> String {
        "abs".into()
    }
}

/// Indicator of the box `[−γ, γ]ⁿ`.
#[derive(Debug, Clone)]
pub struct BoxIndicator {
    n: usize,
    gamma: f64,
}

impl BoxIndicator {
    pub fn new(n: usize, gamma: f64) -> Self {
        BoxIndicator { n, gamma }
    }
}

impl ConvexProblem for BoxIndicator {
    fn dim(&self) -> usize {
        self.n
    }
    fn simple_value(&self, y: &[f64]) -> Option<f64> {
        if y.iter().all(|v| v.abs() <= self.gamma) {
            Some(0.0)
        } else {
            None
        }
    }
    fn simple_prox(&self, _t: f64, u: &[f64]) -> Vec<f64> {
        project_linf_ball(u, self.gamma)
    }
    fn exact_prox(&self, _lambda: f64, x: &[f64]) -> Option<Vec<f64>> {
        Some(project_linf_ball(x, self.gamma))
    }
    fn name(&self) -> String {
        "box_indicator".into()
    }
}

/// `½‖By − d‖² + γ‖y‖₁`; its proximal mapping has no closed form.
#[derive(Debug, Clone)]
pub struct L1RegularizedLeastSquares {
    b: DenseMatrix,
    d: Vec<f64>,
    gamma: f64,
    lipschitz: f64,
}

impl L1RegularizedLeastSquares {
    pub fn new(b: DenseMatrix, d: Vec<f64>, gamma: f64) -> Self {
        let op = operator_norm(&b, 5000, 1e-14);
        L1RegularizedLeastSquares {
            b,
            d,
            gamma,
            lipschitz: op * op,
        }
    }

    /// Gaussian `B` scaled by `1/√m` and Gaussian `d`.
    pub fn random(m: usize, n: usize, gamma: f64, rng: &mut SeededRng) -> Self {
        let raw = DenseMatrix::gaussian(m, n, rng);
        let s = 1.0 / (m as f64).sqrt();
        let b = DenseMatrix::from_row_major(m, n, raw.as_slice().iter().map(|v| v * s).collect())
            .expect("finite");
        let d = rng.gaussian_vec(m);
        Self::new(b, d, gamma)
    }
}

impl ConvexProblem for L1RegularizedLeastSquares {
    fn dim(&self) -> usize {
        self.b.ncols()
    }
    fn smooth_value(&self, y: &[f64]) -> f64 {
        0.5 * linalg::norm_sq(&linalg::sub(&self.b.apply(y), &self.d))
    }
    fn smooth_gradient(&self, y: &[f64]) -> Vec<f64> {
        self.b.apply_adjoint(&linalg::sub(&self.b.apply(y), &self.d))
    }
    fn smooth_lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn simple_value(&self, y: &[f64]) -> Option<f64> {
        Some(self.gamma * linalg::norm_l1(y))
    }
    fn simple_prox(&self, t: f64, u: &[f64]) -> Vec<f64> {
        soft_threshold(u, t * self.gamma)
    }
    fn name(&self) -> String {
        "l1_regularized_least_squares".into()
    }
}

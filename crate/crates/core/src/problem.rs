//! Smooth objectives with Lipschitz gradients and a small test zoo.

use crate::linalg::{self, operator_norm, DenseMatrix, LinearOperator};
use crate::rng::SeededRng;

/// A `C^{1,1}` objective: value, gradient and a global Lipschitz constant of
/// the gradient.
pub trait SmoothProblem {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Exact gradient, or `None` when it is withheld (for instance a Moreau
    /// envelope whose proximal mapping has no closed form).
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>>;

    fn lipschitz(&self) -> f64;

    /// Lipschitz constant of the Hessian, if the objective is `C²` and one is
    /// known. Centered differences need it.
    fn hessian_lipschitz(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> String {
        "anonymous".into()
    }

    /// Radius of the ball around the origin on which [`lipschitz`](Self::lipschitz)
    /// is valid, when it is not global.
    fn region_radius(&self) -> Option<f64> {
        None
    }
}

impl<T: SmoothProblem + ?Sized> SmoothProblem for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        (**self).gradient(x)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn hessian_lipschitz(&self) -> Option<f64> {
        (**self).hessian_lipschitz()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn region_radius(&self) -> Option<f64> {
        (**self).region_radius()
    }
}

impl<T: SmoothProblem + ?Sized> SmoothProblem for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        (**self).gradient(x)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn hessian_lipschitz(&self) -> Option<f64> {
        (**self).hessian_lipschitz()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn region_radius(&self) -> Option<f64> {
        (**self).region_radius()
    }
}

/// `½ xᵀQx + qᵀx` with symmetric positive semidefinite `Q`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    name: String,
    q: DenseMatrix,
    linear: Vec<f64>,
    lipschitz: f64,
}

impl Quadratic {
    /// `lipschitz` must bound the largest eigenvalue of `q`.
    pub fn new(name: &str, q: DenseMatrix, linear: Vec<f64>, lipschitz: f64) -> Self {
        assert_eq!(q.nrows(), q.ncols());
        assert_eq!(linear.len(), q.ncols());
        Quadratic {
            name: name.into(),
            q,
            linear,
            lipschitz,
        }
    }

    /// `½‖x‖²`.
    pub fn sphere(n: usize) -> Self {
        Self::new("sphere", DenseMatrix::identity(n), vec![0.0; n], 1.0)
    }

    /// `½ Σ dᵢ xᵢ²`.
    pub fn diagonal(d: &[f64]) -> Self {
        let l = d.iter().fold(0.0_f64, |m, v| m.max(*v));
        Self::new("diag_quadratic", DenseMatrix::diagonal(d), vec![0.0; d.len()], l)
    }

    /// `Q = BᵀB/n + 0.1 I` with Gaussian `B`, and a Gaussian linear term.
    pub fn random_spd(n: usize, rng: &mut SeededRng) -> Self {
        let b = DenseMatrix::gaussian(n, n, rng);
        let g = b.gram();
        let mut data = g.as_slice().to_vec();
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] /= n as f64;
            }
            data[i * n + i] += 0.1;
        }
        let q = DenseMatrix::from_row_major(n, n, data).expect("finite");
        let lipschitz = operator_norm(&q, 2000, 1e-14);
        let linear = rng.gaussian_vec(n);
        Self::new("random_spd_quadratic", q, linear, lipschitz)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.linear
    }
}

impl SmoothProblem for Quadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * linalg::dot(x, &self.q.apply(x)) + linalg::dot(&self.linear, x)
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(linalg::add(&self.q.apply(x), &self.linear))
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn hessian_lipschitz(&self) -> Option<f64> {
        // any positive constant bounds a constant Hessian's variation
        Some(1.0)
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// `½‖Ax − b‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: DenseMatrix,
    b: Vec<f64>,
    lipschitz: f64,
}

impl LeastSquares {
    pub fn new(a: DenseMatrix, b: Vec<f64>) -> Self {
        let op = operator_norm(&a, 2000, 1e-14);
        LeastSquares {
            lipschitz: op * op,
            a,
            b,
        }
    }

    pub fn random(m: usize, n: usize, rng: &mut SeededRng) -> Self {
        let a = DenseMatrix::gaussian(m, n, rng);
        let b = rng.gaussian_vec(m);
        Self::new(a, b)
    }
}

impl SmoothProblem for LeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * linalg::norm_sq(&linalg::sub(&self.a.apply(x), &self.b))
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let r = linalg::sub(&self.a.apply(x), &self.b);
        Some(self.a.apply_adjoint(&r))
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn hessian_lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
    fn name(&self) -> String {
        "least_squares".into()
    }
}

/// Max of `|σ''|` for the logistic sigmoid, `1/(6√3)`, rounded up.
const LOGISTIC_THIRD_DERIVATIVE_MAX: f64 = 0.096_226;

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Ridge-regularised logistic loss `(1/m) Σ log(1 + exp(−yᵢ aᵢᵀx)) + (ρ/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct Logistic {
    a: DenseMatrix,
    labels: Vec<f64>,
    ridge: f64,
    lipschitz: f64,
    hessian_lipschitz: f64,
}

impl Logistic {
    pub fn random(m: usize, n: usize, ridge: f64, rng: &mut SeededRng) -> Self {
        let a = DenseMatrix::gaussian(m, n, rng);
        let labels = (0..m)
            .map(|_| if rng.uniform() < 0.5 { -1.0 } else { 1.0 })
            .collect();
        let op = operator_norm(&a, 2000, 1e-14);
        let mf = m as f64;
        let cube_sum: f64 = (0..m).map(|i| linalg::norm(a.row(i)).powi(3)).sum();
        Logistic {
            lipschitz: op * op / (4.0 * mf) + ridge,
            hessian_lipschitz: LOGISTIC_THIRD_DERIVATIVE_MAX * cube_sum / mf,
            a,
            labels,
            ridge,
        }
    }
}

impl SmoothProblem for Logistic {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let ax = self.a.apply(x);
        let m = ax.len() as f64;
        let loss: f64 = ax
            .iter()
            .zip(&self.labels)
            .map(|(t, y)| softplus(-y * t))
            .sum();
        loss / m + 0.5 * self.ridge * linalg::norm_sq(x)
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let ax = self.a.apply(x);
        let m = ax.len() as f64;
        let w: Vec<f64> = ax
            .iter()
            .zip(&self.labels)
            .map(|(t, y)| -y * sigmoid(-y * t) / m)
            .collect();
        let mut g = self.a.apply_adjoint(&w);
        linalg::axpy(self.ridge, x, &mut g);
        Some(g)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn hessian_lipschitz(&self) -> Option<f64> {
        Some(self.hessian_lipschitz)
    }
    fn name(&self) -> String {
        "logistic".into()
    }
}

/// Separable sums `Σ φ(xᵢ)` of one-dimensional smooth kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `√(1 + t²) − 1`
    PseudoHuber,
    /// `1 − cos t` (nonconvex)
    Cosine,
    /// `log cosh t`
    LogCosh,
}

impl Kernel {
    fn value(self, t: f64) -> f64 {
        match self {
            Kernel::PseudoHuber => t * t / ((1.0 + t * t).sqrt() + 1.0),
            Kernel::Cosine => 2.0 * (0.5 * t).sin().powi(2),
            Kernel::LogCosh => {
                let a = t.abs();
                a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
            }
        }
    }

    fn derivative(self, t: f64) -> f64 {
        match self {
            Kernel::PseudoHuber => t / (1.0 + t * t).sqrt(),
            Kernel::Cosine => t.sin(),
            Kernel::LogCosh => t.tanh(),
        }
    }

    /// Sup of `|φ''|`.
    fn curvature_bound(self) -> f64 {
        1.0
    }

    /// Sup of `|φ'''|`, rounded up.
    fn third_derivative_bound(self) -> f64 {
        match self {
            // 3·(1/2)/(5/4)^{5/2}
            Kernel::PseudoHuber => 0.858_66,
            Kernel::Cosine => 1.0,
            // 4/(3√3)
            Kernel::LogCosh => 0.769_81,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeparableSum {
    kernel: Kernel,
    n: usize,
}

impl SeparableSum {
    pub fn new(kernel: Kernel, n: usize) -> Self {
        SeparableSum { kernel, n }
    }
}

impl SmoothProblem for SeparableSum {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for t in x {
            s += self.kernel.value(*t);
        }
        s
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.iter().map(|t| self.kernel.derivative(*t)).collect())
    }
    fn lipschitz(&self) -> f64 {
        self.kernel.curvature_bound()
    }
    fn hessian_lipschitz(&self) -> Option<f64> {
        Some(self.kernel.third_derivative_bound())
    }
    fn name(&self) -> String {
        match self.kernel {
            Kernel::PseudoHuber => "pseudo_huber",
            Kernel::Cosine => "cosine_sum",
            Kernel::LogCosh => "log_cosh",
        }
        .into()
    }
}

/// `½‖Ax − b‖² + γ Σ √(xᵢ² + s²)`, a smoothed ℓ1-regularised least squares.
#[derive(Debug, Clone)]
pub struct SmoothedL1LeastSquares {
    ls: LeastSquares,
    gamma: f64,
    smoothing: f64,
}

impl SmoothedL1LeastSquares {
    pub fn random(m: usize, n: usize, gamma: f64, smoothing: f64, rng: &mut SeededRng) -> Self {
        SmoothedL1LeastSquares {
            ls: LeastSquares::random(m, n, rng),
            gamma,
            smoothing,
        }
    }
}

impl SmoothProblem for SmoothedL1LeastSquares {
    fn dim(&self) -> usize {
        self.ls.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let s2 = self.smoothing * self.smoothing;
        let mut reg = 0.0;
        for t in x {
            reg += (t * t + s2).sqrt();
        }
        self.ls.value(x) + self.gamma * reg
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let s2 = self.smoothing * self.smoothing;
        let mut g = self.ls.gradient(x)?;
        for (gi, t) in g.iter_mut().zip(x) {
            *gi += self.gamma * t / (t * t + s2).sqrt();
        }
        Some(g)
    }
    fn lipschitz(&self) -> f64 {
        self.ls.lipschitz() + self.gamma / self.smoothing
    }
    fn hessian_lipschitz(&self) -> Option<f64> {
        Some(self.gamma * Kernel::PseudoHuber.third_derivative_bound() / (self.smoothing * self.smoothing))
    }
    fn name(&self) -> String {
        "smoothed_l1_least_squares".into()
    }
}

/// Names accepted by [`by_name`].
pub const ZOO_NAMES: &[&str] = &[
    "quad",
    "aniso",
    "spd",
    "lsq",
    "logistic",
    "pseudo_huber",
    "cosine",
    "logcosh",
    "kl4",
    "smooth_l1",
];

/// Builds a zoo problem by name. Random members are drawn from `seed`.
pub fn by_name(name: &str, seed: u64) -> Option<Box<dyn SmoothProblem + Send + Sync>> {
    let mut rng = SeededRng::new(seed);
    let p: Box<dyn SmoothProblem + Send + Sync> = match name {
        "quad" => Box::new(Quadratic::sphere(2)),
        "aniso" => Box::new(Quadratic::diagonal(&[1.0, 4.0])),
        "spd" => Box::new(Quadratic::random_spd(5, &mut rng)),
        "lsq" => Box::new(LeastSquares::random(8, 5, &mut rng)),
        "logistic" => Box::new(Logistic::random(20, 4, 0.1, &mut rng)),
        "pseudo_huber" => Box::new(SeparableSum::new(Kernel::PseudoHuber, 3)),
        "cosine" => Box::new(SeparableSum::new(Kernel::Cosine, 3)),
        "logcosh" => Box::new(SeparableSum::new(Kernel::LogCosh, 4)),
        "kl4" => Box::new(crate::rates::PowerFunction::new(4.0, 3, 2.0).ok()?),
        "smooth_l1" => Box::new(SmoothedL1LeastSquares::random(10, 6, 0.1, 0.5, &mut rng)),
        _ => return None,
    };
    Some(p)
}

/// Every zoo member, built from one seed.
pub fn zoo(seed: u64) -> Vec<Box<dyn SmoothProblem + Send + Sync>> {
    ZOO_NAMES
        .iter()
        .map(|n| by_name(n, seed).expect("zoo name"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_point(rng: &mut SeededRng, n: usize, radius: Option<f64>) -> Vec<f64> {
        match radius {
            Some(r) => {
                let dir = rng.unit_vector(n);
                let s = r * rng.uniform();
                dir.into_iter().map(|d| d * s).collect()
            }
            None => rng.gaussian_vec(n).into_iter().map(|v| 3.0 * v).collect(),
        }
    }

    #[test]
    fn descent_lemma_holds_on_zoo() {
        let mut rng = SeededRng::new(2024);
        for p in zoo(1) {
            let l = p.lipschitz();
            for _ in 0..1000 {
                let x = random_point(&mut rng, p.dim(), p.region_radius());
                let y = random_point(&mut rng, p.dim(), p.region_radius());
                let g = p.gradient(&x).unwrap();
                let lhs = p.value(&y) - p.value(&x) - linalg::dot(&g, &linalg::sub(&y, &x));
                let rhs = 0.5 * l * linalg::norm_sq(&linalg::sub(&y, &x));
                assert!(lhs <= rhs + 1e-10, "{}: {lhs} > {rhs}", p.name());
            }
        }
    }

    #[test]
    fn zoo_gradients_match_central_differences() {
        let mut rng = SeededRng::new(8);
        for p in zoo(2) {
            let x = random_point(&mut rng, p.dim(), p.region_radius().map(|r| 0.5 * r));
            let g = p.gradient(&x).unwrap();
            let h = 1e-5;
            for i in 0..p.dim() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()),
                    "{} component {i}: {fd} vs {}",
                    p.name(),
                    g[i]
                );
            }
        }
    }

    #[test]
    fn zoo_has_ten_c2_members() {
        let z = zoo(0);
        assert!(z.len() >= 10);
        assert!(z.iter().all(|p| p.hessian_lipschitz().is_some()));
    }
}

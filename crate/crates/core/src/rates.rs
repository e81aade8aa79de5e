//! KL test functions and convergence-rate fitting.
//!
//! `f(x) = ‖x‖^p/p` satisfies `‖∇f(x)‖ = M f(x)^q` with `q = 1 − 1/p` and
//! `M = p^q`. For `q ≤ 1/2` the IGD iterates converge linearly; for
//! `q ∈ (1/2, 1)` the distance to the minimiser decays like
//! `k^{−(1−q)/(2q−1)}`.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::igd::{igd_solve, ConfigError, IgdConfig, IgdOutcome};
use crate::linalg;
use crate::oracles::NoisyOracle;
use crate::problem::SmoothProblem;
use crate::rng::SeededRng;
use crate::trace::IterationTrace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("fewer than {needed} usable points in window [{k0}, {k1}]")]
    TooFewPoints { k0: usize, k1: usize, needed: usize },
    #[error("trace has no recorded iterates")]
    MissingIterates,
}

/// `‖x‖^p/p` on the ball of radius `R`, where its gradient is
/// `(p − 1)R^{p−2}`-Lipschitz.
#[derive(Debug, Clone)]
pub struct PowerFunction {
    p: f64,
    dim: usize,
    radius: f64,
}

impl PowerFunction {
    pub fn new(p: f64, dim: usize, radius: f64) -> Result<Self, ConfigError> {
        if !(p >= 2.0 && p.is_finite()) {
            return Err(ConfigError::new(format!(
                "power p = {p} is below 2; the gradient would not be Lipschitz at 0"
            )));
        }
        if dim == 0 || !(radius > 0.0) {
            return Err(ConfigError::new("dimension and radius must be positive"));
        }
        Ok(PowerFunction { p, dim, radius })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// KL exponent `1 − 1/p`.
    pub fn kl_exponent(&self) -> f64 {
        1.0 - 1.0 / self.p
    }

    /// KL constant `p^q`.
    pub fn kl_constant(&self) -> f64 {
        self.p.powf(self.kl_exponent())
    }
}

/// [`PowerFunction::new`] under its descriptive name.
pub fn make_kl_function(p: f64, dim: usize, region_radius: f64) -> Result<PowerFunction, ConfigError> {
    PowerFunction::new(p, dim, region_radius)
}

impl SmoothProblem for PowerFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        linalg::norm(x).powf(self.p) / self.p
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let r = linalg::norm(x);
        if r == 0.0 {
            return Some(vec![0.0; x.len()]);
        }
        Some(linalg::scale(x, r.powf(self.p - 2.0)))
    }

    fn lipschitz(&self) -> f64 {
        (self.p - 1.0) * self.radius.powf(self.p - 2.0)
    }

    fn hessian_lipschitz(&self) -> Option<f64> {
        // ∇²f = ‖x‖²I + 2xxᵀ for p = 4 changes by at most 6R‖x − y‖ on the ball
        if self.p == 2.0 {
            Some(1.0)
        } else if self.p == 4.0 {
            Some(6.0 * self.radius)
        } else {
            None
        }
    }

    fn name(&self) -> String {
        format!("power_p{}", self.p)
    }

    fn region_radius(&self) -> Option<f64> {
        Some(self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    Linear,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    IterateDist,
    FGap,
    GradNorm,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::IterateDist, Quantity::FGap, Quantity::GradNorm];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::IterateDist => "iterate_dist",
            Quantity::FGap => "f_gap",
            Quantity::GradNorm => "grad_norm",
        }
    }

    /// Decay exponent predicted for KL exponent `q ∈ (1/2, 1)`; `None` means
    /// linear convergence.
    pub fn predicted_exponent(self, q: f64) -> Option<f64> {
        if q <= 0.5 {
            return None;
        }
        let base = (1.0 - q) / (2.0 * q - 1.0);
        Some(match self {
            Quantity::FGap => -2.0 * base,
            Quantity::IterateDist | Quantity::GradNorm => -base,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub kind: RateKind,
    /// Contraction factor `ρ` for linear fits, slope `s` for power fits.
    pub estimate: f64,
    /// Iteration range actually used.
    pub window: (usize, usize),
    /// `1 − R²` of the log-space least-squares fit.
    pub residual: f64,
    /// The requested window contained nonpositive values and was cut short.
    pub truncated: bool,
}

impl RateFit {
    pub fn is_contractive(&self) -> bool {
        self.kind == RateKind::Linear && self.estimate < 1.0
    }
}

/// Least-squares line through `(t, y)`: slope and `1 − R²`. A constant `y`
/// gives slope 0 and residual 0.
pub fn least_squares(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (ti, yi) in t.iter().zip(y) {
        stt += (ti - tm) * (ti - tm);
        sty += (ti - tm) * (yi - ym);
        syy += (yi - ym) * (yi - ym);
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    if syy == 0.0 {
        return (slope, 0.0);
    }
    let ss_res = syy - slope * sty;
    (slope, (ss_res / syy).max(0.0))
}

/// `(k, value)` pairs of the quantity inside `[k0, k1]`, cut at the first
/// nonpositive value.
fn series(
    trace: &IterationTrace,
    quantity: Quantity,
    window: (usize, usize),
    f_star: f64,
    x_star: Option<&[f64]>,
) -> Result<(Vec<(usize, f64)>, bool), RateError> {
    let mut out = Vec::new();
    let mut truncated = false;
    for r in trace.records().iter().filter(|r| r.k >= window.0 && r.k <= window.1) {
        let v = match quantity {
            Quantity::FGap => r.f_val - f_star,
            Quantity::GradNorm => r.grad_norm,
            Quantity::IterateDist => {
                let x = r.x.as_ref().ok_or(RateError::MissingIterates)?;
                match x_star {
                    Some(s) => linalg::dist(x, s),
                    None => linalg::norm(x),
                }
            }
        };
        if !(v > 0.0 && v.is_finite()) {
            warn!(
                "{} is not positive at k = {}; fit window truncated",
                quantity.name(),
                r.k
            );
            truncated = true;
            break;
        }
        out.push((r.k, v));
    }
    Ok((out, truncated))
}

fn check_points(pts: &[(usize, f64)], window: (usize, usize)) -> Result<(), RateError> {
    if pts.len() < 3 {
        return Err(RateError::TooFewPoints {
            k0: window.0,
            k1: window.1,
            needed: 3,
        });
    }
    Ok(())
}

/// Fits `log(f(x^k) − f*) ≈ a + k·log ρ` over `window`.
pub fn fit_linear_rate(trace: &IterationTrace, window: (usize, usize), f_star: f64) -> Result<RateFit, RateError> {
    let (pts, truncated) = series(trace, Quantity::FGap, window, f_star, None)?;
    check_points(&pts, window)?;
    let t: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, residual) = least_squares(&t, &y);
    Ok(RateFit {
        kind: RateKind::Linear,
        estimate: slope.exp(),
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual,
        truncated,
    })
}

/// Fits `log q_k ≈ a + s·log k` over `window` for the chosen quantity.
/// `x_star` defaults to the origin.
pub fn fit_power_rate(
    trace: &IterationTrace,
    quantity: Quantity,
    window: (usize, usize),
    f_star: f64,
    x_star: Option<&[f64]>,
) -> Result<RateFit, RateError> {
    let (pts, truncated) = series(trace, quantity, window, f_star, x_star)?;
    check_points(&pts, window)?;
    let t: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, residual) = least_squares(&t, &y);
    Ok(RateFit {
        kind: RateKind::Power,
        estimate: slope,
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual,
        truncated,
    })
}

/// IGD with the bounded-noise oracle on `‖x‖^p/p` from a random point on the
/// sphere of radius `R/2`, keeping every iterate.
pub fn run_power_experiment(
    f: &PowerFunction,
    mu: f64,
    max_outer: usize,
    seed: u64,
) -> Result<IgdOutcome, ConfigError> {
    let mut rng = SeededRng::new(seed);
    let x0 = linalg::scale(&rng.unit_vector(f.dim), 0.5 * f.radius);
    let cfg = IgdConfig {
        max_outer,
        eps_tol: 1e-150,
        record_iterates: true,
        ..IgdConfig::preset(mu, f.lipschitz())
    };
    let mut oracle = NoisyOracle::new(f, seed.wrapping_add(1));
    igd_solve(f, &mut oracle, &x0, &cfg)
}

/// One line of the rate report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub function_p: f64,
    pub q: f64,
    pub quantity: String,
    /// Decay exponent, or `linear`.
    pub predicted_exp: String,
    /// Fitted slope for power rates, contraction factor `ρ` for linear ones.
    pub fitted_exp: f64,
    pub residual: f64,
}

/// Parameters of [`rate_report`].
#[derive(Debug, Clone)]
pub struct RateSuite {
    pub powers: Vec<f64>,
    pub dim: usize,
    pub radius: f64,
    pub mu: f64,
    pub max_outer: usize,
    /// First iteration used in every fit.
    pub window_start: usize,
    pub seed: u64,
}

impl Default for RateSuite {
    fn default() -> Self {
        RateSuite {
            powers: vec![2.0, 4.0],
            dim: 3,
            radius: 2.0,
            mu: 3.0,
            max_outer: 10_000,
            window_start: 10,
            seed: 0,
        }
    }
}

/// Runs the suite and fits every quantity: linear fits (of the log of each
/// quantity against `k`) for `q ≤ 1/2`, log-log fits otherwise.
pub fn rate_report(suite: &RateSuite) -> Result<Vec<RateRow>, ConfigError> {
    let mut rows = Vec::new();
    for &p in &suite.powers {
        let f = PowerFunction::new(p, suite.dim, suite.radius)?;
        let q = f.kl_exponent();
        let out = run_power_experiment(&f, suite.mu, suite.max_outer, suite.seed)?;
        let window = (suite.window_start, usize::MAX);
        for quantity in Quantity::ALL {
            let predicted = quantity.predicted_exponent(q);
            let fit = match predicted {
                None => linear_fit_of(&out.trace, quantity, window),
                Some(_) => fit_power_rate(&out.trace, quantity, window, 0.0, None),
            };
            let (fitted, residual) = match fit {
                Ok(fit) => (fit.estimate, fit.residual),
                Err(e) => {
                    warn!("p = {p}, {}: {e}", quantity.name());
                    (f64::NAN, f64::NAN)
                }
            };
            rows.push(RateRow {
                function_p: p,
                q,
                quantity: quantity.name().into(),
                predicted_exp: predicted.map_or_else(|| "linear".to_string(), |e| e.to_string()),
                fitted_exp: fitted,
                residual,
            });
        }
    }
    Ok(rows)
}

/// Linear-rate fit of any quantity.
pub fn linear_fit_of(trace: &IterationTrace, quantity: Quantity, window: (usize, usize)) -> Result<RateFit, RateError> {
    let (pts, truncated) = series(trace, quantity, window, 0.0, None)?;
    check_points(&pts, window)?;
    let t: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, residual) = least_squares(&t, &y);
    Ok(RateFit {
        kind: RateKind::Linear,
        estimate: slope.exp(),
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::IterationRecord;

    fn synthetic(values: impl Fn(usize) -> f64, n: usize) -> IterationTrace {
        let mut t = IterationTrace::new("synthetic");
        for k in 1..=n {
            t.record(IterationRecord {
                k,
                f_val: values(k),
                grad_norm: values(k),
                eps_k: 1.0,
                i_k: 0,
                inner_iters: 0,
                elapsed: 0.0,
                x: Some(vec![values(k)]),
            })
            .unwrap();
        }
        t
    }

    #[test]
    fn geometric_trace_gives_exact_rho() {
        let t = synthetic(|k| 0.5f64.powi(k as i32), 60);
        let fit = fit_linear_rate(&t, (10, 60), 0.0).unwrap();
        assert!((fit.estimate - 0.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn constant_trace_is_not_contractive() {
        let t = synthetic(|_| 2.0, 30);
        let fit = fit_linear_rate(&t, (10, 30), 0.0).unwrap();
        assert_eq!(fit.estimate, 1.0);
        assert!(!fit.is_contractive());
    }

    #[test]
    fn power_trace_gives_exact_slope() {
        let t = synthetic(|k| (k as f64).powf(-0.5), 1000);
        for q in Quantity::ALL {
            let fit = fit_power_rate(&t, q, (10, 1000), 0.0, None).unwrap();
            assert!((fit.estimate + 0.5).abs() < 1e-12, "{q:?}");
        }
    }

    #[test]
    fn nonpositive_gap_truncates() {
        let t = synthetic(|k| if k < 20 { 1.0 / k as f64 } else { 0.0 }, 40);
        let fit = fit_power_rate(&t, Quantity::FGap, (5, 40), 0.0, None).unwrap();
        assert!(fit.truncated);
        assert_eq!(fit.window, (5, 19));
    }

    #[test]
    fn power_function_basics() {
        let f2 = make_kl_function(2.0, 3, 1.0).unwrap();
        assert_eq!(f2.lipschitz(), 1.0);
        assert_eq!(f2.kl_exponent(), 0.5);
        assert!((f2.kl_constant() - 2f64.sqrt()).abs() < 1e-15);
        let f4 = make_kl_function(4.0, 3, 1.0).unwrap();
        assert_eq!(f4.kl_exponent(), 0.75);
        assert_eq!(Quantity::IterateDist.predicted_exponent(0.75), Some(-0.5));
        assert_eq!(Quantity::FGap.predicted_exponent(0.75), Some(-1.0));
        assert_eq!(Quantity::FGap.predicted_exponent(0.5), None);
        assert!(make_kl_function(1.5, 3, 1.0).is_err());
    }

    #[test]
    fn kl_inequality_on_region() {
        let mut rng = SeededRng::new(1);
        for p in [2.0, 3.0, 4.0] {
            let f = PowerFunction::new(p, 4, 1.5).unwrap();
            let (m, q) = (f.kl_constant(), f.kl_exponent());
            for _ in 0..10_000 {
                let x = linalg::scale(&rng.unit_vector(4), 1.5 * rng.uniform());
                let lhs = linalg::norm(&f.gradient(&x).unwrap());
                assert!(lhs >= m * f.value(&x).powf(q) * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn report_shape() {
        let rows = rate_report(&RateSuite {
            max_outer: 300,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].predicted_exp, "linear");
        assert_eq!(rows[3].predicted_exp, "-0.5");
    }
}

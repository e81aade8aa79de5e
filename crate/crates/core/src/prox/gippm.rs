use serde::{Deserialize, Serialize};

use crate::igd::{igd_solve, ConfigError, IgdConfig, IgdOutcome};
use crate::linalg;
use crate::oracles::MoreauOracle;
use crate::problem::SmoothProblem;

use super::{solve_prox_subproblem, ConvexProblem, ProxOracle};

/// Certificate level of the auxiliary solve behind envelope values when no
/// closed-form prox exists.
const ENVELOPE_TARGET: f64 = 1e-11;
const ENVELOPE_BUDGET: u64 = 50_000_000;

/// `e_λg(x) = min_y g(y) + ‖y − x‖²/(2λ)` as a smooth problem with
/// `∇e_λg(x) = (x − Prox_{λg}(x))/λ` and Lipschitz constant `1/λ`.
///
/// Values use the closed-form prox when available and otherwise a tight
/// auxiliary solve whose suboptimality is below `λ·10⁻²²/2`.
pub struct MoreauEnvelope<'a, G: ConvexProblem + ?Sized> {
    g: &'a G,
    lambda: f64,
}

impl<'a, G: ConvexProblem + ?Sized> MoreauEnvelope<'a, G> {
    pub fn new(g: &'a G, lambda: f64) -> Self {
        MoreauEnvelope { g, lambda }
    }

    /// `Prox_{λg}(x)`, exact or to the auxiliary accuracy.
    pub fn prox_point(&self, x: &[f64]) -> Vec<f64> {
        if let Some(p) = self.g.exact_prox(self.lambda, x) {
            return p;
        }
        let target = ENVELOPE_TARGET * (1.0 + linalg::norm(x)) / self.lambda;
        match solve_prox_subproblem(self.g, self.lambda, x, x, target, ENVELOPE_BUDGET) {
            Ok(s) => s.point,
            Err(_) => vec![f64::NAN; x.len()],
        }
    }

    /// Whether values come from a closed form.
    pub fn is_exact(&self) -> bool {
        let probe = vec![0.0; self.g.dim()];
        self.g.exact_prox(self.lambda, &probe).is_some()
    }
}

impl<G: ConvexProblem + ?Sized> SmoothProblem for MoreauEnvelope<'_, G> {
    fn dim(&self) -> usize {
        self.g.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let p = self.prox_point(x);
        self.g
            .value(&p)
            .map_or(f64::NAN, |gv| gv + linalg::dist(&p, x).powi(2) / (2.0 * self.lambda))
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let p = self.prox_point(x);
        Some(x.iter().zip(&p).map(|(xi, pi)| (xi - pi) / self.lambda).collect())
    }

    fn lipschitz(&self) -> f64 {
        1.0 / self.lambda
    }

    fn name(&self) -> String {
        format!("moreau({})", self.g.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GippmConfig {
    pub lambda: f64,
    /// Loop parameters. `lipschitz` is overwritten with `1/λ`.
    pub igd: IgdConfig,
}

impl GippmConfig {
    pub fn new(lambda: f64, mut igd: IgdConfig) -> Self {
        igd.lipschitz = 1.0 / lambda;
        GippmConfig { lambda, igd }
    }

    /// `ε₁ = 1`, `θ = 0.8` and the given `μ`.
    pub fn preset(lambda: f64, mu: f64) -> Self {
        Self::new(lambda, IgdConfig::preset(mu, 1.0 / lambda))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ConfigError::new(format!("lambda must be positive, got {}", self.lambda)));
        }
        let l = self.igd.lipschitz;
        if (l * self.lambda - 1.0).abs() > 1e-12 {
            return Err(ConfigError::new(format!("lipschitz {l} must equal 1/lambda")));
        }
        self.igd.validate()
    }
}

/// Inexact proximal point method with adaptive error control.
///
/// Runs the IGD loop on `e_λg` with the oracle `g^k = (x^k − p^k)/λ` built
/// from `prox`, so that `x^{k+1} = p^k`. The trace's `f_val` column holds
/// `e_λg(x^k)`.
pub fn gippm_solve<G, O>(problem: &G, prox: O, x0: &[f64], cfg: &GippmConfig) -> Result<IgdOutcome, ConfigError>
where
    G: ConvexProblem + ?Sized,
    O: ProxOracle,
{
    cfg.validate()?;
    if (prox.lambda() - cfg.lambda).abs() > 1e-15 * cfg.lambda {
        return Err(ConfigError::new(format!(
            "prox oracle uses lambda {}, configuration {}",
            prox.lambda(),
            cfg.lambda
        )));
    }
    let envelope = MoreauEnvelope::new(problem, cfg.lambda);
    let mut oracle = MoreauOracle::new(prox);
    let mut out = igd_solve(&envelope, &mut oracle, x0, &cfg.igd)?;
    out.trace.method = "gippm".into();
    out.trace.set_meta("lambda", cfg.lambda);
    out.trace.set_meta(
        "envelope_values",
        if envelope.is_exact() { "exact" } else { "approximate" },
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::{InnerProx, NoisyProx, SquaredNorm};
    use crate::trace::Status;

    #[test]
    fn first_step_on_squared_norm() {
        let g = SquaredNorm::new(1);
        let cfg = GippmConfig::new(
            1.0,
            IgdConfig {
                eps1: 0.1,
                max_outer: 1,
                ..IgdConfig::preset(3.0, 1.0)
            },
        );
        let out = gippm_solve(&g, InnerProx::new(&g, 1.0), &[1.0], &cfg).unwrap();
        let r = &out.trace.records()[0];
        assert_eq!(r.i_k, 0);
        assert_eq!(out.x, vec![0.5]);
    }

    #[test]
    fn converges_to_minimizer() {
        let g = SquaredNorm::new(3);
        let cfg = GippmConfig::new(
            0.5,
            IgdConfig {
                eps_tol: 1e-6,
                ..IgdConfig::preset(3.0, 2.0)
            },
        );
        let out = gippm_solve(&g, InnerProx::new(&g, 0.5).inner_only(), &[1.0, -2.0, 3.0], &cfg).unwrap();
        assert!(out.status.is_success(), "{}", out.status);
        assert!(linalg::norm(&out.x) <= 1e-4);
    }

    #[test]
    fn start_at_minimizer_gives_certificate() {
        let g = SquaredNorm::new(2);
        let cfg = GippmConfig::preset(1.0, 3.0);
        let out = gippm_solve(&g, NoisyProx::new(&g, 1.0, 8), &[0.0, 0.0], &cfg).unwrap();
        assert!(matches!(out.status, Status::StationaryCertificate { .. }));
        assert!(out.trace.is_empty());
    }

    #[test]
    fn lambda_mismatch_rejected() {
        let g = SquaredNorm::new(1);
        let cfg = GippmConfig::preset(1.0, 3.0);
        assert!(gippm_solve(&g, InnerProx::new(&g, 2.0), &[1.0], &cfg).is_err());
        let mut bad = cfg.clone();
        bad.igd.lipschitz = 3.0;
        assert!(bad.validate().is_err());
    }
}

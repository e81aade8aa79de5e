use inexact_core::lasso::{project_linf_ball, soft_threshold};
use inexact_core::linalg;
use inexact_core::prox::{
    prox_objective, solve_prox_subproblem, BoxIndicator, ConvexProblem, L1Norm, L1RegularizedLeastSquares,
};
use inexact_core::SeededRng;
use proptest::prelude::*;

/// Grid minimiser of `φ(t) = p(t) + (t − u)²/(2λ)` with step `h` over `[lo, hi]`.
fn grid_argmin(p: impl Fn(f64) -> f64, u: f64, lambda: f64, lo: f64, hi: f64, h: f64) -> f64 {
    let steps = ((hi - lo) / h).round() as i64;
    let mut best = (f64::INFINITY, lo);
    for s in 0..=steps {
        let t = lo + s as f64 * h;
        let v = p(t) + (t - u).powi(2) / (2.0 * lambda);
        if v < best.0 {
            best = (v, t);
        }
    }
    best.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn soft_threshold_matches_grid_search(u in -3.0..3.0f64, tau in 0.0..2.0f64) {
        let t = grid_argmin(|t| tau * t.abs(), u, 1.0, -4.0, 4.0, 1e-4);
        prop_assert!((soft_threshold(&[u], tau)[0] - t).abs() <= 2e-4);
    }

    #[test]
    fn projection_matches_grid_search(u in -3.0..3.0f64, gamma in 0.01..2.0f64) {
        // indicator of [−γ, γ]: search only the feasible interval
        let t = grid_argmin(|_| 0.0, u, 1.0, -gamma, gamma, 1e-4);
        prop_assert!((project_linf_ball(&[u], gamma)[0] - t).abs() <= 2e-4);
    }

    #[test]
    fn moreau_decomposition(
        u in prop::collection::vec(-5.0..5.0f64, 1..12),
        lambda in 0.01..10.0f64,
        gamma in 0.01..3.0f64,
    ) {
        // p = γ‖·‖₁, p* = indicator of γB∞
        let prox_p = soft_threshold(&u, lambda * gamma);
        let prox_conj = project_linf_ball(&linalg::scale(&u, 1.0 / lambda), gamma);
        for i in 0..u.len() {
            prop_assert!((u[i] - prox_p[i] - lambda * prox_conj[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn exact_proxes_are_nonexpansive(
        x in prop::collection::vec(-5.0..5.0f64, 4),
        y in prop::collection::vec(-5.0..5.0f64, 4),
        lambda in 0.01..5.0f64,
        gamma in 0.05..2.0f64,
    ) {
        let l1 = L1Norm::new(4, gamma);
        let bx = BoxIndicator::new(4, gamma);
        let d = linalg::dist(&x, &y);
        for g in [&l1 as &dyn ConvexProblem, &bx] {
            let px = g.exact_prox(lambda, &x).unwrap();
            let py = g.exact_prox(lambda, &y).unwrap();
            prop_assert!(linalg::dist(&px, &py) <= d * (1.0 + 1e-14) + 1e-15);
        }
    }

    #[test]
    fn exact_prox_minimises_prox_objective(
        x in prop::collection::vec(-5.0..5.0f64, 4),
        dir in prop::collection::vec(-1.0..1.0f64, 4),
        lambda in 0.01..5.0f64,
        gamma in 0.05..2.0f64,
    ) {
        let g = L1Norm::new(4, gamma);
        let p = g.exact_prox(lambda, &x).unwrap();
        let base = prox_objective(&g, lambda, &x, &p).unwrap();
        for s in [1e-3, 1e-1, 1.0] {
            let q: Vec<f64> = p.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
            prop_assert!(prox_objective(&g, lambda, &x, &q).unwrap() >= base - 1e-12);
        }
    }
}

#[test]
fn inner_prox_solves_are_nonexpansive_up_to_their_accuracy() {
    let mut rng = SeededRng::new(11);
    let g = L1RegularizedLeastSquares::random(12, 8, 0.4, &mut rng);
    let lambda = 0.7;
    let tol = 1e-11;
    for _ in 0..100 {
        let x = rng.gaussian_vec(8);
        let y = rng.gaussian_vec(8);
        let px = solve_prox_subproblem(&g, lambda, &x, &x, tol, 1_000_000).unwrap();
        let py = solve_prox_subproblem(&g, lambda, &y, &y, tol, 1_000_000).unwrap();
        // each point is within λ·certificate of the true prox
        let slack = lambda * (px.certificate + py.certificate);
        assert!(linalg::dist(&px.point, &py.point) <= linalg::dist(&x, &y) + slack);
    }
}

#[test]
fn inner_solver_agrees_with_closed_form() {
    let mut rng = SeededRng::new(5);
    let g = L1Norm::new(6, 0.8);
    for _ in 0..50 {
        let x = linalg::scale(&rng.gaussian_vec(6), 2.0);
        let lambda = rng.uniform_in(0.1, 3.0);
        let s = solve_prox_subproblem(&g, lambda, &x, &x, 1e-9, 100_000).unwrap();
        let exact = g.exact_prox(lambda, &x).unwrap();
        assert!(linalg::dist(&s.point, &exact) <= lambda * s.certificate + 1e-15);
    }
}

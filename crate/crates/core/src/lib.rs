//! Inexact gradient methods with adaptive error control.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`], [`rng`] and [`trace`]: dense vectors and matrices, linear
//!   operators, seeded randomness and per-iteration logging.
//! * [`problem`] and [`oracles`]: smooth objectives and the inexact gradient
//!   query `‖g − ∇f(x)‖ ≤ ε` (finite differences, bounded noise, Moreau
//!   envelopes).
//! * [`igd`]: the inexact gradient descent loop, which shrinks the requested
//!   gradient error geometrically until the estimate is large relative to it.
//! * [`prox`]: the gradient-based inexact proximal point method, obtained by
//!   running [`igd`] on a Moreau envelope, plus classical summable-error
//!   baselines.
//! * [`alm`]: the gradient-based inexact augmented Lagrangian method for
//!   `min h(x) s.t. Ax = b` and the classical inexact ALM baseline.
//! * [`lasso`]: the Lasso experiments (dual reformulation, inner solver,
//!   residual, random and blur instances).
//! * [`rates`]: KL test functions and convergence-rate fitting.

pub mod alm;
pub mod igd;
pub mod lasso;
pub mod linalg;
pub mod oracles;
pub mod problem;
pub mod prox;
pub mod rates;
pub mod rng;
pub mod trace;

pub use igd::{igd_solve, IgdConfig, IgdOutcome};
pub use linalg::{DenseMatrix, LinearOperator};
pub use oracles::GradientOracle;
pub use problem::SmoothProblem;
pub use rng::SeededRng;
pub use trace::{IterationRecord, IterationTrace, Status};

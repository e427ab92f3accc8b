//! Front-fixing finite difference solvers for American-style floating-strike
//! Asian call options.
//!
//! The free boundary problem for the option value `V(t, S, A)` is reduced with
//! the similarity variables `x = A/S`, `W = V/A` and then mapped onto a fixed
//! domain with the Landau transformation `xi = ln(rho(tau) x)`. The unknowns
//! become the synthetic portfolio `Pi(xi, tau) = W + x dW/dx` on `xi in [0, L]`
//! and the boundary ratio `rho(tau) = S_f / A`, coupled through an algebraic
//! constraint at `xi = 0`.
//!
//! Two time-marching engines are provided:
//!
//! * [`solver_newton`]: the full per-layer nonlinear system in
//!   `(y_1, .., y_{N-1}, z)` solved by Newton's method with a bordered
//!   tridiagonal Jacobian;
//! * [`solver_pc`]: a predictor-corrector engine that predicts the boundary
//!   from a scalar equation at the left edge and corrects with a single
//!   frozen-coefficient implicit solve.
//!
//! All numerical code is generic over the scalar type ([`Real`]); the aliases
//! at the crate root fix it to `f64`, which is what the CLI uses.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod mesh;
pub mod model;
pub mod scalar;
pub mod scheme;
pub mod solution;
pub mod solver_newton;
pub mod solver_pc;
pub mod tridiag;

pub use error::{SolverError, SolverResult};
pub use mesh::{default_domain_length, default_time_steps, initial_layer};
pub use model::{rho_initial, MarketParams as GenericMarketParams};
pub use scalar::Real;
pub use scheme::SchemeMode;
pub use solution::{Engine, SolverSettings};

/// Market and contract inputs in double precision.
pub type MarketParams = model::MarketParams<f64>;
/// Space-time mesh in double precision.
pub type GridSpec = mesh::GridSpec<f64>;
/// One time layer of the discrete solution.
pub type LayerState = mesh::LayerState<f64>;
/// Complete marching result.
pub type SolveResult = solution::SolveResult<f64>;
pub type LayerDiagnostics = solution::LayerDiagnostics<f64>;
pub type TridiagonalSystem = tridiag::TridiagonalSystem<f64>;
pub type NewtonConfig = solver_newton::NewtonConfig<f64>;
pub type PredictorConfig = solver_pc::PredictorConfig<f64>;
pub type Settings = solution::SolverSettings<f64>;
pub type RefinementReport = analysis::RefinementReport<f64>;
pub type EngineComparison = analysis::EngineComparison<f64>;

/// Single precision variants, mostly useful for experiments with round-off.
pub mod f32 {
    pub type MarketParams = crate::model::MarketParams<f32>;
    pub type GridSpec = crate::mesh::GridSpec<f32>;
    pub type SolveResult = crate::solution::SolveResult<f32>;
}
